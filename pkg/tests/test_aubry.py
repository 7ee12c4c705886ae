import math

import numpy as np
import pytest

from contactkam.aubry import (
    barrier,
    flow_invariance_defect,
    graph_check,
    hausdorff_x,
    mather_estimate,
    projected_aubry,
    sigma_core_estimate,
)
from contactkam.errors import ConsistencyError, ToleranceError, UsageError
from contactkam.grids import GridField, PeriodicGrid, constant_field
from contactkam.models import make_model
from contactkam.weakkam import solve_backward, solve_forward

from conftest import u1_field

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def quad_estimate():
    g = PeriodicGrid((128,), (1.0,))
    m = make_model("quadratic_contact", circle_lengths=(1.0,), v_max=4.0)
    um = solve_backward(m, constant_field(g, 1.0), 2e-3, n_v=33, v_max=4.0).field
    up = solve_forward(m, um, 2e-3, n_v=33, v_max=4.0).field
    return m, g, projected_aubry(m, um, up, tol_set=1e-4)


@pytest.fixture(scope="module")
def pendulum_estimate():
    g = PeriodicGrid((256,), (TWO_PI,))
    m = make_model("pendulum_dissipative", circle_lengths=(TWO_PI,), v_max=8.0, p0=2.0)
    um = solve_backward(m, constant_field(g, 0.0), 2e-3, t_max=30.0, n_v=33, v_max=8.0).field
    up = solve_forward(m, um, 2e-3, t_max=30.0, n_v=33, v_max=8.0).field
    return m, g, um, projected_aubry(m, um, up, tol_set=2e-3)


def test_barrier_zero_for_coincident_solutions(quad_estimate):
    m, g, est = quad_estimate
    assert est.barrier.max <= 1e-4
    assert est.barrier.min >= 0.0


def test_barrier_example_parabola():
    # exact fields of u + |Du|^2/2 = 0: u_- = 0 and v_+ = u1 give B = x^2/2 (even)
    u1 = u1_field(512)
    zero = constant_field(u1.grid, 0.0)
    b = barrier(zero, u1, tol_clamp=1e-9)
    x = u1.grid.axis(0)
    d = np.minimum(x, 1.0 - x)
    assert np.array_equal(b.values, 0.5 * d * d)


def test_barrier_consistency_error(quad_estimate):
    m, g, est = quad_estimate
    zero = constant_field(g, 0.0)
    above = constant_field(g, 0.2)
    with pytest.raises(ConsistencyError):
        barrier(zero, above, tol_clamp=0.05)
    # tiny negatives clamp to zero
    eps = constant_field(g, 1e-9)
    assert barrier(zero, eps, tol_clamp=1e-6).min == 0.0


def test_projected_aubry_quadratic_full_torus(quad_estimate):
    m, g, est = quad_estimate
    assert est.cells.size == g.num_nodes  # B = 0 everywhere
    # lift is the zero section
    assert np.max(np.abs(est.lift[:, 1])) <= 5e-3
    assert np.max(np.abs(est.lift[:, 2])) <= 1e-2
    assert est.grad_gap_max <= 10.0 * g.min_spacing


def test_projected_aubry_empty_tolerance(quad_estimate):
    m, g, est = quad_estimate
    up_low = GridField(g, est.barrier.values * 0 - 0.02)
    um = constant_field(g, 0.0)
    with pytest.raises(ToleranceError):
        projected_aubry(m, um, up_low, tol_set=1e-9)


def test_graph_check_flat_section(quad_estimate):
    m, g, est = quad_estimate
    assert graph_check(est) <= 1e-1  # zero section: near-flat graph


def test_graph_check_manufactured_bound():
    g = PeriodicGrid((256,), (1.0,))
    m = make_model("manufactured", circle_lengths=(1.0,), v_max=3.0)
    um = solve_backward(m, constant_field(g, 0.0), 2e-3, n_v=33, v_max=3.0).field
    up = solve_forward(m, um, 2e-3, n_v=33, v_max=3.0).field
    est = projected_aubry(m, um, up, tol_set=1e-2)
    assert est.cells.size > 0
    amp = 0.3
    lip = math.hypot(amp * 2 * math.pi, amp * (2 * math.pi) ** 2)
    # exact graph of (W, W'): chord slopes are bounded by sqrt(W'^2 + W''^2)
    import dataclasses

    x = g.nodes()
    wv, wg, wh = m._w_parts(x)
    exact_lift = np.concatenate([x, wv[:, None], wg], axis=1)
    exact = dataclasses.replace(est, cells=np.arange(g.num_nodes), lift=exact_lift)
    assert graph_check(exact) <= lip * (1 + 1e-9)
    # the computed lift carries curvature of the scheme error on top
    assert graph_check(est) <= 2.0 * lip


def test_mather_quadratic_fixed_points(quad_estimate):
    m, g, est = quad_estimate
    mat = mather_estimate(m, est, t_rec=2.0, dt_flow=1e-3)
    assert mat.classification == "fixed_points"
    assert len(mat.recurrent_idx) == est.cells.size
    assert np.all(mat.periods == 0.0)


def test_mather_pendulum_periodic_orbit(pendulum_estimate):
    m, g, um, est = pendulum_estimate
    assert est.cells.size == g.num_nodes  # band around the attractor circle
    mat = mather_estimate(m, est, t_rec=15.0, dt_flow=1e-3)
    assert mat.classification == "periodic_orbit"
    live = mat.periods[mat.periods > 0]
    assert np.median(live) == pytest.approx(3.21, abs=0.1)


def test_mather_manufactured_recurrent_subset():
    # gentle-amplitude target: the recurrent subset of the lift is the set of
    # nodes parked at the equilibria of dx/dt = W'(x); all are stationary
    g = PeriodicGrid((128,), (1.0,))
    m = make_model("manufactured", circle_lengths=(1.0,), v_max=2.0, amplitude=0.02)
    um = solve_backward(m, constant_field(g, 0.0), 2e-3, n_v=33, v_max=2.0).field
    up = solve_forward(m, um, 2e-3, n_v=33, v_max=2.0).field
    est = projected_aubry(m, um, up, tol_set=1e-3)
    mat = mather_estimate(m, est, t_rec=5.0, dt_flow=1e-3)
    assert 0 < len(mat.recurrent_idx) < est.cells.size
    assert mat.classification == "fixed_points"


def test_graph_check_pendulum_finite(pendulum_estimate):
    m, g, um, est = pendulum_estimate
    lip = graph_check(est)
    assert np.isfinite(lip) and lip > 0.0


def test_alpha_limit_lands_in_aubry_lift(pendulum_estimate):
    from contactkam.aubry import _min_dist_to_set
    from contactkam.flow import calibrated_backward, limit_set

    m, g, um, est = pendulum_estimate
    traj = calibrated_backward(m, um, (2.0,), 3.0, 1e-3)
    reps = limit_set(traj, 0.2, 3.0 * g.min_spacing)
    dists = _min_dist_to_set(
        m.circle_lengths, np.array([r.as_array() for r in reps]), est.lift
    )
    assert dists.max() <= 3.0 * g.min_spacing


def test_pendulum_no_fixed_points_on_lift(pendulum_estimate):
    from contactkam.flow import vector_field

    m, g, um, est = pendulum_estimate
    speeds = np.linalg.norm(vector_field(m, est.lift), axis=1)
    assert speeds.min() > 1e-3  # p0 outside [-1, 1]: the field never vanishes


def test_flow_invariance(quad_estimate):
    m, g, est = quad_estimate
    assert flow_invariance_defect(m, est, 1.0, 1e-3) <= 3.0 * g.min_spacing


def test_lift_residual(pendulum_estimate):
    m, g, um, est = pendulum_estimate
    h = np.abs(m.H(est.lift[:, :1], est.lift[:, 1], est.lift[:, 2:]))
    assert h.max() <= 1e-2


def test_sigma_core_and_hausdorff(quad_estimate):
    m, g, est = quad_estimate
    um = constant_field(g, 0.0)
    core = sigma_core_estimate(m, um, horizon=1.0, dt_flow=1e-3)
    assert core.size == g.num_nodes  # whole zero section is invariant
    assert hausdorff_x(g, est.cells, core) == 0.0
    assert hausdorff_x(g, est.cells[:1], est.cells[:1]) == 0.0


def test_mather_needs_lift(quad_estimate):
    m, g, est = quad_estimate
    import dataclasses

    empty = dataclasses.replace(est, cells=np.array([], dtype=int), lift=est.lift[:0])
    with pytest.raises(UsageError):
        mather_estimate(m, empty)
