import math

import numpy as np
import pytest

from contactkam.errors import NumericalError, UsageError
from contactkam.models import (
    SampleSpec,
    audit_assumptions,
    default_v_max,
    eval_H,
    eval_L,
    grad_H,
    legendre_max,
    make_model,
    manufactured_target,
)
from contactkam.grids import PeriodicGrid

TWO_PI = 2.0 * math.pi


def test_unknown_family_rejected():
    with pytest.raises(UsageError, match="valid families"):
        make_model("harmonic")


def test_eval_H_zero_section(quad_model):
    for x in (0.0, 0.3, 0.9):
        assert eval_H(quad_model, quad_model.point((x,), 0.0, (0.0,))) == 0.0


def test_eval_H_pendulum_substitution(pendulum_model):
    # H = (p - p0)^2/2 + cos x + u at (0, 0, 2) with p0 = 2
    pt = pendulum_model.point((0.0,), 0.0, (2.0,))
    assert eval_H(pendulum_model, pt) == pytest.approx(1.0, abs=1e-15)


def test_eval_H_manufactured_identity(manufactured_model):
    m = manufactured_model
    for x in np.linspace(0, 1, 23):
        w, grad, _ = m._w_parts(np.array([[x]]))
        pt = m.point((x,), float(w[0]), (float(grad[0, 0]),))
        assert eval_H(m, pt) == pytest.approx(0.0, abs=1e-13)


def test_eval_L_quadratic(quad_model):
    assert eval_L(quad_model, (0.2,), 0.0, (0.0,)) == 0.0
    assert eval_L(quad_model, (0.2,), 1.0, (2.0,)) == pytest.approx(1.0, abs=1e-15)


def test_eval_L_pendulum_against_lattice_sup(pendulum_model):
    # closed form says L(0,0,0) = -1; brute-force sup over a p-lattice agrees
    val = eval_L(pendulum_model, (0.0,), 0.0, (0.0,))
    assert val == pytest.approx(-1.0, abs=1e-14)
    ps = np.linspace(-10, 10, 20001)
    brute = np.max(0.0 * ps - pendulum_model.H(np.zeros((len(ps), 1)), 0.0, ps[:, None]))
    assert val == pytest.approx(brute, abs=1e-6)


def test_grad_H_quadratic(quad_model):
    hx, hu, hp = grad_H(quad_model, quad_model.point((0.4,), 0.7, (1.3,)))
    assert np.allclose(hx, 0.0) and hu == 1.0 and np.allclose(hp, 1.3)


def test_grad_H_pendulum_flow_reading(pendulum_model):
    hx, hu, hp = grad_H(pendulum_model, pendulum_model.point((0.0,), 0.0, (2.0,)))
    assert np.allclose(hx, 0.0) and hu == 1.0 and np.allclose(hp, 0.0)


@pytest.mark.parametrize(
    "family,kwargs,lengths",
    [
        ("manufactured", {}, (1.0,)),
        ("pendulum_dissipative", {"p0": 2.0}, (TWO_PI,)),
        ("discounted_mechanical", {"lam": 0.7, "v0": 0.5}, (1.0,)),
        ("custom_coefficients", {"quad": 1.5, "p4": 0.2, "uc": 0.5, "amplitude": 0.3}, (1.0,)),
        ("manufactured", {"amplitude": 0.2}, (1.0, 1.0)),
    ],
)
def test_grad_H_matches_finite_differences(family, kwargs, lengths):
    m = make_model(family, circle_lengths=lengths, v_max=4.0, **kwargs)
    rng = np.random.default_rng(17)
    eps = 1e-6
    for _ in range(12):
        x = rng.uniform(0, lengths, size=m.d)
        u = rng.uniform(-1.5, 1.5)
        p = rng.uniform(-2, 2, size=m.d)
        hx, hu, hp = grad_H(m, m.point(x, u, p))
        for ax in range(m.d):
            dx = np.zeros(m.d)
            dx[ax] = eps
            fd = (m.H(x + dx, u, p) - m.H(x - dx, u, p)) / (2 * eps)
            assert hx[ax] == pytest.approx(float(fd), rel=1e-6, abs=1e-6)
            fdp = (m.H(x, u, p + dx) - m.H(x, u, p - dx)) / (2 * eps)
            assert hp[ax] == pytest.approx(float(fdp), rel=1e-6, abs=1e-6)
        fdu = (m.H(x, u + eps, p) - m.H(x, u - eps, p)) / (2 * eps)
        assert hu == pytest.approx(float(fdu), rel=1e-6, abs=1e-6)


def test_fenchel_equality_and_duality_roundtrip():
    # at the maximizer p*: L(x,u,v) + H(x,u,p*) - <v,p*> = 0 and v = dH/dp(p*)
    m = make_model("custom_coefficients", v_max=6.0, quad=1.2, p4=0.3, uc=0.8, amplitude=0.4)
    rng = np.random.default_rng(23)
    for _ in range(10):
        x = rng.uniform(0, 1, size=1)
        u = rng.uniform(-1, 1)
        v = rng.uniform(-3, 3, size=1)
        lval, pstar = legendre_max(m, x, u, v)
        gap = lval + float(m.H(x, u, pstar)) - float(v @ pstar)
        assert abs(gap) < 1e-10
        _, _, hp = m.gradients(x, u, pstar)
        assert np.max(np.abs(hp - v)) < 1e-8


def test_eval_L_newton_matches_radial_conjugate():
    # vectorized Cardano route and the damped-Newton route agree
    m = make_model("custom_coefficients", v_max=6.0, quad=0.9, p4=0.25, uc=1.0)
    rng = np.random.default_rng(29)
    for _ in range(10):
        v = rng.uniform(-3, 3, size=1)
        newton = eval_L(m, (0.0,), 0.3, v)
        closed = m.L(np.zeros((1, 1)), 0.3, v[None, :])[0]
        assert newton == pytest.approx(closed, abs=1e-9)


def test_eval_L_strictly_decreasing_in_u(manufactured_model):
    rng = np.random.default_rng(31)
    for _ in range(10):
        x = rng.uniform(0, 1, size=1)
        v = rng.uniform(-2, 2, size=1)
        u1, u2 = sorted(rng.uniform(-2, 2, size=2))
        if u2 - u1 < 1e-9:
            continue
        assert eval_L(manufactured_model, x, u1, v) > eval_L(manufactured_model, x, u2, v)


def test_eval_L_rejects_nonconvex():
    broken = make_model("custom_coefficients", v_max=4.0, quad=-1.0, uc=1.0)
    with pytest.raises(NumericalError):
        eval_L(broken, (0.0,), 0.0, (1.0,))


def test_audit_passes_builtin_families(quad_model, pendulum_model):
    for m in (quad_model, pendulum_model):
        rep = audit_assumptions(m, SampleSpec(x_count=9, u_count=9, p_count=9))
        assert rep.passed
        assert rep.h1_min_eig == pytest.approx(1.0)
        assert rep.h3_min == rep.h3_max == pytest.approx(1.0)


def test_audit_flags_broken_h3():
    broken = make_model("custom_coefficients", v_max=4.0, uc=0.0, amplitude=0.5)
    rep = audit_assumptions(broken, SampleSpec(x_count=9, u_count=9, p_count=9))
    assert not rep.h3_pass and rep.h1_pass
    assert rep.worst_h3 is not None  # located sample comes with the report


def test_audit_flags_broken_h1():
    broken = make_model("custom_coefficients", v_max=4.0, quad=-0.5)
    rep = audit_assumptions(broken, SampleSpec(x_count=5, u_count=5, p_count=5))
    assert not rep.h1_pass
    assert rep.h1_min_eig == pytest.approx(-0.5)


def test_default_v_max_is_audit_box_gradient_sup(quad_model):
    assert default_v_max(quad_model) == pytest.approx(8.0)
    pend = make_model("pendulum_dissipative", p0=2.0)
    assert pend.v_max == pytest.approx(10.0)  # sup |p - 2| over |p| <= 8


def test_manufactured_target_shape(manufactured_model):
    g = PeriodicGrid((64,), (1.0,))
    w = manufactured_target(manufactured_model, g)
    assert w.shape == (64,)
    assert w[0] == pytest.approx(0.3)


def test_point_reduces_to_fundamental_domain(quad_model):
    pt = quad_model.point((1.75,), 0.0, (0.5,))
    assert pt.x[0] == pytest.approx(0.75)
