import numpy as np
import pytest

from contactkam.action import (
    backward_action,
    check_reversibility,
    forward_action,
    init_action,
    markov_defect,
)
from contactkam.errors import UsageError
from contactkam.grids import PeriodicGrid
from contactkam.models import manufactured_target

KW = dict(n_v=33, v_max=4.0)


def grid(n=256):
    return PeriodicGrid((n,), (1.0,))


def test_init_action_at_base_point(quad_model):
    g = grid()
    slc = init_action(quad_model, g, (0.25,), 0.0, 0.01)
    assert slc.at((0.25,)) == pytest.approx(0.0, abs=1e-12)
    assert slc.t == 0.01 and slc.kind == "forward_h"


def test_init_action_quadratic_arithmetic(quad_model):
    # node at displacement 0.1 with delta = 0.01: value = 0.01 * (10^2 / 2)
    g = grid(100)  # nodes at multiples of 0.01, so 0.1 displacement is exact
    slc = init_action(quad_model, g, (0.2,), 0.0, 0.01)
    node = int(round(0.3 / g.spacing[0]))
    assert slc.values.values[node] == pytest.approx(0.5, abs=1e-12)


def test_backward_init_dual_sign(quad_model):
    g = grid()
    slc = init_action(quad_model, g, (0.25,), 0.0, 0.01, kind="backward_h")
    assert slc.at((0.25,)) == pytest.approx(0.0, abs=1e-12)
    # far nodes get large negative values for the dual problem
    assert slc.values.min < -1.0


def test_propagate_converges_to_backward_solution(quad_model):
    # the t -> infinity limit of every forward slice is the unique backward solution (= 0)
    g = grid()
    slc = forward_action(quad_model, g, (0.3,), 0.5, 10.0, 2e-3, **KW)
    assert np.max(np.abs(slc.values.values)) <= 5e-3
    assert slc.t == pytest.approx(10.0)


def test_monotone_in_base_value(quad_model):
    g = grid(128)
    lo = forward_action(quad_model, g, (0.3,), -1.0, 0.5, 2e-3, **KW)
    hi = forward_action(quad_model, g, (0.3,), 1.0, 0.5, 2e-3, **KW)
    assert np.all(lo.values.values < hi.values.values)


def test_base_shift_bounded_and_monotone(quad_model):
    g = grid(128)
    t = 0.5
    base = forward_action(quad_model, g, (0.3,), 0.2, t, 2e-3, **KW)
    shifted = forward_action(quad_model, g, (0.3,), 1.2, t, 2e-3, **KW)
    gap = shifted.values.values - base.values.values
    lam = quad_model.lambda_bound
    assert np.all(gap > 0.0)
    assert np.max(gap) <= np.exp(lam * t) + 1e-6


def test_manufactured_slice_converges_to_w(manufactured_model):
    g = PeriodicGrid((512,), (1.0,))
    w = manufactured_target(manufactured_model, g)
    slc = forward_action(
        manufactured_model, g, (0.33,), 0.1, 10.0, 2e-3, n_v=33, v_max=3.0
    )
    assert np.max(np.abs(slc.values.values - w)) <= 2e-2


def test_init_refinement_study(quad_model):
    # one-segment init vs the exact short-time action of u + p^2/2:
    # the minimizing characteristic decelerates (dx/ds = v0 e^{-s}), giving
    # h(d, delta) = (d^2/2) e^{-delta} / (1 - e^{-delta}); the init's relative
    # error is delta/2 + O(delta^2), so halving delta halves it
    g = grid(1024)
    rel = []
    for delta in (0.02, 0.01, 0.005):
        slc = init_action(quad_model, g, (0.5,), 0.0, delta)
        d = g.shortest_disp(np.array([0.5]), g.nodes())[:, 0]
        sel = (np.abs(d) > 0) & (np.abs(d) <= 3.0 * delta)
        exact = 0.5 * d[sel] ** 2 * np.exp(-delta) / (1.0 - np.exp(-delta))
        rel.append(np.max(np.abs(slc.values.values.ravel()[sel] - exact) / exact))
    for delta, r in zip((0.02, 0.01, 0.005), rel):
        assert 0.3 * delta <= r <= 0.8 * delta
    assert rel[0] / rel[1] == pytest.approx(2.0, rel=0.15)


def test_backward_action_monotone_in_base_value(quad_model):
    g = grid(128)
    rng = np.random.default_rng(21)
    for _ in range(5):
        u_lo, u_hi = sorted(rng.uniform(-1.0, 1.0, size=2))
        if u_hi - u_lo < 1e-6:
            continue
        lo = backward_action(quad_model, g, (0.3,), u_lo, 0.3, 2e-3, **KW)
        hi = backward_action(quad_model, g, (0.3,), u_hi, 0.3, 2e-3, **KW)
        assert np.all(lo.values.values < hi.values.values)


def test_slice_matches_characteristic_ensemble_value(quad_model):
    # for u + p^2/2 the connecting characteristic (dx/ds = v0 e^{-s}) gives the
    # minimal terminal value in closed form:
    #   h_{x0,u0}(x,t) = u0 e^{-t} + (d^2/2) e^{-t} / (1 - e^{-t})
    # which realizes the minimality property over flow solutions
    g = grid()
    x0, u0 = 0.25, 0.4
    for t in (0.5, 1.0):
        slc = forward_action(quad_model, g, (x0,), u0, t, 1e-3, **KW)
        d = g.shortest_disp(np.array([x0]), g.nodes())[:, 0]
        exact = u0 * np.exp(-t) + 0.5 * d * d * np.exp(-t) / (1.0 - np.exp(-t))
        assert np.max(np.abs(slc.values.values.ravel() - exact)) <= 5e-3


def test_reversibility_quadratic(quad_model):
    g = grid()
    defect = check_reversibility(quad_model, g, (0.2,), 0.0, (0.2,), 1.0, 1e-3, **KW)
    assert defect <= 1e-2


def test_reversibility_manufactured(manufactured_model):
    g = PeriodicGrid((256,), (1.0,))
    rng = np.random.default_rng(2)
    x0, x = rng.uniform(0, 1, size=2)
    defect = check_reversibility(
        manufactured_model, g, (x0,), 0.1, (x,), 1.0, 1e-3, n_v=33, v_max=3.0
    )
    assert defect <= 2e-2


def test_reversibility_defect_shrinks_under_refinement(quad_model):
    coarse = check_reversibility(
        quad_model, grid(128), (0.7,), 0.3, (0.2,), 0.5, 2e-3, **KW
    )
    fine = check_reversibility(
        quad_model, grid(256), (0.7,), 0.3, (0.2,), 0.5, 1e-3, **KW
    )
    assert fine <= coarse / 1.3


def test_markov_defect_and_split_independence(quad_model):
    g = grid()
    d1 = markov_defect(quad_model, g, (0.3,), 0.2, 0.5, 0.5, 1e-3, **KW)
    d2 = markov_defect(quad_model, g, (0.3,), 0.2, 0.3, 0.7, 1e-3, **KW)
    assert d1 <= 2e-2 and d2 <= 2e-2


def test_action_preconditions(quad_model):
    g = grid(128)
    with pytest.raises(UsageError):
        init_action(quad_model, g, (0.0,), 0.0, -0.01)
    with pytest.raises(UsageError):
        forward_action(quad_model, g, (0.0,), 0.0, 0.005, 1e-3, delta=0.01)
    with pytest.raises(UsageError):
        check_reversibility(quad_model, g, (0.0,), 0.0, (0.5,), 0.015, 1e-3)


def test_reversibility_exact_identity_backward_route(quad_model):
    # h_{x0,u0}(x,t) = u iff h^{x,u}(x0,t) = u0: check via the backward slice
    g = grid()
    t = 0.5
    fwd = forward_action(quad_model, g, (0.1,), 0.4, t, 1e-3, **KW)
    u = fwd.at((0.6,))
    back = backward_action(quad_model, g, (0.6,), u, t - 0.01, 1e-3, **KW)
    assert abs(back.at((0.1,)) - 0.4) <= 1e-2
    assert back.kind == "backward_h" and back.t == pytest.approx(t)
