import math

import numpy as np
import pytest

from contactkam.critical import (
    boundedness_check,
    find_admissible_level,
    frozen_backward_step,
    mane_critical_value,
)
from contactkam.errors import UsageError
from contactkam.grids import PeriodicGrid, constant_field
from contactkam.models import make_model
from contactkam.semigroup import StepOperator
from contactkam.weakkam import random_smooth_field

TWO_PI = 2.0 * math.pi


def mech_model(p0=0.0):
    # frozen p^2/2 + cos x + a realized as the pendulum family at level a
    return make_model("pendulum_dissipative", circle_lengths=(TWO_PI,), v_max=4.0, p0=p0)


def test_frozen_step_constant_drift(quad_model, grid1d):
    # L(x, a, v) = v^2/2 - a: one step of f = 0 gives -a dt everywhere, exactly
    for a in (-1.0, 0.0, 2.5):
        out = frozen_backward_step(quad_model, a, constant_field(grid1d, 0.0), 2e-3, v_max=4.0)
        assert np.allclose(out.values, -a * 2e-3, rtol=0, atol=1e-18)


def test_frozen_step_shift_rule(quad_model, grid1d):
    rng = np.random.default_rng(8)
    f = random_smooth_field(grid1d, rng)
    op = StepOperator(quad_model, grid1d, 2e-3, "backward", freeze_u=0.7, v_max=4.0)
    base = op.apply(f.values)
    shifted = op.apply(f.values + 2.5)
    assert np.max(np.abs(shifted - (base + 2.5))) < 1e-13


def test_frozen_comparison_and_nonexpansive(grid1d):
    m = mech_model()
    g = PeriodicGrid((128,), (TWO_PI,))
    op = StepOperator(m, g, 5e-3, "backward", freeze_u=0.0, n_v=33, v_max=4.0)
    rng = np.random.default_rng(12)
    for _ in range(10):
        f = random_smooth_field(g, rng)
        h = random_smooth_field(g, rng)
        lo = np.minimum(f.values, h.values) - 0.1
        assert np.all(op.apply(lo) < op.apply(f.values))
        d0 = np.max(np.abs(f.values - h.values))
        assert np.max(np.abs(op.apply(f.values) - op.apply(h.values))) <= d0 + 1e-12


def test_mane_critical_value_quadratic_exact(quad_model, grid1d):
    # constant fields stay constant: the drift is -a per unit time exactly
    for a in (-0.7, 0.0, 1.3):
        est = mane_critical_value(quad_model, a, grid1d, dt=5e-3, t_avg=6.0, v_max=4.0)
        assert est.c == pytest.approx(a, abs=1e-10)
        assert not est.flagged


def test_mane_critical_value_mechanical():
    # c(H^a) = max(cos) + a = 1 + a for the frozen mechanical family
    m = mech_model()
    g = PeriodicGrid((256,), (TWO_PI,))
    est = mane_critical_value(m, 0.0, g, dt=5e-3, t_avg=10.0, n_v=33, v_max=4.0)
    assert est.c == pytest.approx(1.0, abs=2e-2)


def test_mane_monotone_in_a():
    m = mech_model()
    g = PeriodicGrid((128,), (TWO_PI,))
    cs = [
        mane_critical_value(m, a, g, dt=5e-3, t_avg=6.0, n_v=33, v_max=4.0).c
        for a in (-1.0, -0.5, 0.0, 0.5)
    ]
    assert all(c2 >= c1 - 1e-6 for c1, c2 in zip(cs, cs[1:]))


def test_find_admissible_level_mechanical():
    m = mech_model()
    g = PeriodicGrid((256,), (TWO_PI,))
    res = find_admissible_level(m, g, -10.0, 10.0, tol_a=1e-3, tol_c=5e-3,
                                dt=5e-3, t_avg=10.0, n_v=33, v_max=4.0)
    assert res.a_star == pytest.approx(-1.0, abs=2e-2)


def test_find_admissible_level_quadratic(quad_model, grid1d):
    res = find_admissible_level(quad_model, grid1d, -10.0, 10.0, tol_a=1e-3,
                                tol_c=1e-4, dt=5e-3, t_avg=6.0, v_max=4.0)
    assert abs(res.a_star) <= 1e-3


def test_bracket_failure(quad_model, grid1d):
    with pytest.raises(UsageError, match="not admissible"):
        find_admissible_level(quad_model, grid1d, 1.0, 2.0, dt=5e-3, t_avg=6.0, v_max=4.0)


def test_boundedness_quadratic(quad_model, grid1d):
    rep = boundedness_check(quad_model, grid1d, (0.3,), 0.5, t_max=10.0, dt=2e-3, v_max=4.0)
    assert rep.bounded and rep.verdict == "admissible-consistent"
    # the slice settles at the unique backward solution (= 0)
    t_last, lo, hi = rep.sup_series[-1]
    assert abs(lo) <= 1e-2 and abs(hi) <= 1e-2


def test_boundedness_flags_frozen_drift():
    # u-independent surrogate H = p^2/2 + cos x + 1: value drifts at rate c = 2
    m = make_model(
        "custom_coefficients", circle_lengths=(TWO_PI,), v_max=4.0,
        uc=0.0, amplitude=1.0, offset=1.0,
    )
    g = PeriodicGrid((128,), (TWO_PI,))
    rep = boundedness_check(m, g, (0.5,), 0.0, t_max=10.0, dt=5e-3, n_v=33, v_max=4.0)
    assert not rep.bounded and rep.verdict == "drifting"
    assert rep.drift == pytest.approx(-2.0, abs=5e-2)


def test_boundedness_manufactured(manufactured_model):
    from contactkam.models import manufactured_target

    g = PeriodicGrid((256,), (1.0,))
    rep = boundedness_check(
        manufactured_model, g, (0.4,), 0.0, t_max=12.0, dt=2e-3, n_v=33, v_max=3.0
    )
    assert rep.bounded
    w = manufactured_target(manufactured_model, g)
    t_last, lo, hi = rep.sup_series[-1]
    assert lo >= w.min() - 5e-2 and hi <= w.max() + 5e-2
