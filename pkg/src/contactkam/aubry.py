"""Barrier function, projected Aubry set estimation, and Mather set estimate.

The projected Aubry set is estimated as the near-zero set of the barrier
B = u_- - u_+ for the maximal forward solution; its lift pairs each cell with
(u_-(x), Du_-(x)), which is a Lipschitz graph over the cells. A second,
independent estimate (the flow-invariant core of the backward-solution
pseudograph) is provided for cross-checking; their Hausdorff distance is
reported, not asserted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import flow as flowmod
from .errors import ConsistencyError, ToleranceError, UsageError
from .grids import GridField, gradient_field, interpolate
from .models import ContactPoint, HamiltonianModel
from .weakkam import kink_tolerant_gradient

TOL_CLAMP_DEFAULT = 5e-2


def barrier(u_minus: GridField, v_plus: GridField, tol_clamp: float = TOL_CLAMP_DEFAULT) -> GridField:
    """Nodewise u_- - v_+, clamped to 0 where slightly negative.

    Negatives beyond tol_clamp violate u_+ <= u_- and raise ConsistencyError.
    """
    if u_minus.grid != v_plus.grid:
        raise UsageError("barrier needs both fields on the same grid")
    b = u_minus.values - v_plus.values
    worst = float(b.min())
    if worst < -tol_clamp:
        raise ConsistencyError(
            f"barrier is {worst:.3e} somewhere; the forward solution exceeds u_- "
            f"beyond the clamp tolerance {tol_clamp:.3e}"
        )
    return GridField(u_minus.grid, np.maximum(b, 0.0))


@dataclass(frozen=True)
class AubryEstimate:
    barrier: GridField
    tol_set: float
    cells: np.ndarray  # flat node indices with B <= tol_set
    lift: np.ndarray  # (len(cells), 2d+1) states (x, u_-(x), Du_-(x))
    grad_gap_max: float  # max |Du_+ - Du_-| over cells (kink-tolerant)

    @property
    def grid(self):
        return self.barrier.grid

    def lift_points(self) -> list[ContactPoint]:
        d = self.grid.d
        return [
            ContactPoint(tuple(s[:d]), float(s[d]), tuple(s[d + 1 :])) for s in self.lift
        ]


def default_tol_set(model: HamiltonianModel, u_minus: GridField, dt: float, **op_kwargs) -> float:
    """10x the scheme's own error scale at u_-: the larger of the backward
    fixed-point residual and the one-step forward defect.

    The backward residual alone underestimates badly once u_- has converged
    (it is then the exact discrete fixed point); the forward defect carries
    the forward/backward quadrature mismatch that drives barrier noise.
    """
    from .semigroup import StepOperator
    from .weakkam import fixed_point_residual

    bwd = fixed_point_residual(model, u_minus, dt, **op_kwargs)
    fop = StepOperator(model, u_minus.grid, dt, "forward", **op_kwargs)
    fwd = float(np.max(np.abs(fop.apply(u_minus.values) - u_minus.values)))
    return 10.0 * max(bwd, fwd, 1e-12)


def projected_aubry(
    model: HamiltonianModel,
    u_minus: GridField,
    u_plus: GridField,
    tol_set: float,
    tol_clamp: float = TOL_CLAMP_DEFAULT,
) -> AubryEstimate:
    """Cells where the barrier of the maximal forward solution is <= tol_set,
    lifted through the central gradient of u_- (C^{1,1} there)."""
    b = barrier(u_minus, u_plus, tol_clamp)
    mask = b.values.ravel() <= tol_set
    cells = np.flatnonzero(mask)
    if cells.size == 0:
        raise ToleranceError(
            f"no barrier values under tol_set = {tol_set:.3e}; "
            "increase tol_set or refine the grid"
        )
    grid = u_minus.grid
    nodes = grid.nodes()[cells]
    grad_minus = gradient_field(u_minus, "central").reshape(-1, grid.d)[cells]
    u_vals = u_minus.values.ravel()[cells]
    lift = np.concatenate([nodes, u_vals[:, None], grad_minus], axis=1)

    gm, _ = kink_tolerant_gradient(model, u_minus)
    gp, _ = kink_tolerant_gradient(model, u_plus)
    gap = np.max(
        np.abs(gm.reshape(-1, grid.d)[cells] - gp.reshape(-1, grid.d)[cells]), initial=0.0
    )
    return AubryEstimate(b, float(tol_set), cells, lift, float(gap))


def graph_check(est: AubryEstimate, max_pairs_nodes: int = 1024) -> float:
    """Max over cell pairs of |(u,p)(x) - (u,p)(y)| / d(x,y): a finite value
    certifies the discrete graph (bi-Lipschitz section) property."""
    if est.cells.size < 2:
        raise UsageError("graph check needs at least two cells")
    grid = est.grid
    lift = est.lift
    if lift.shape[0] > max_pairs_nodes:
        stride = int(np.ceil(lift.shape[0] / max_pairs_nodes))
        lift = lift[::stride]
    d = grid.d
    x = lift[:, :d]
    up = lift[:, d:]
    L = np.asarray(grid.lengths)
    dx = np.abs(x[:, None, :] - x[None, :, :])
    dx = np.minimum(dx, L - dx)
    xdist = np.sqrt(np.sum(dx * dx, axis=-1))
    updist = np.sqrt(np.sum((up[:, None, :] - up[None, :, :]) ** 2, axis=-1))
    off = ~np.eye(lift.shape[0], dtype=bool) & (xdist > 0)
    return float(np.max(updist[off] / xdist[off]))


@dataclass
class MatherEstimate:
    points: np.ndarray  # recurrent states (r, 2d+1)
    recurrent_idx: np.ndarray  # indices into the lift
    periods: np.ndarray  # per recurrent point; 0 for fixed points
    classification: str  # fixed_points | periodic_orbit | mixed | empty
    warnings: list = field(default_factory=list)

    def points_list(self) -> list[ContactPoint]:
        d = (self.points.shape[1] - 1) // 2 if self.points.size else 0
        return [
            ContactPoint(tuple(s[:d]), float(s[d]), tuple(s[d + 1 :])) for s in self.points
        ]


def mather_estimate(
    model: HamiltonianModel,
    est: AubryEstimate,
    t_rec: float = 30.0,
    dt_flow: float = 1e-3,
    r_rec: float | None = None,
    fixed_tol: float = 1e-8,
    escape_factor: float = 10.0,
) -> MatherEstimate:
    """Recurrence scan of the contact flow restricted to the Aubry lift.

    A lift point is a fixed point when the contact vector field vanishes
    (|field| < fixed_tol); otherwise it is recurrent when its orbit, after
    first leaving the r_rec-ball, returns within r_rec of the start. The
    recurrent set is classified as fixed points, a single periodic orbit
    (first-return period estimate), or mixed.
    """
    if est.lift.shape[0] == 0:
        raise UsageError("mather estimate needs a nonempty lift")
    grid = est.grid
    r_rec = 3.0 * grid.min_spacing if r_rec is None else float(r_rec)
    lift = est.lift
    m = lift.shape[0]
    speeds = np.linalg.norm(flowmod.vector_field(model, lift), axis=1)
    fixed = speeds < fixed_tol

    moving = np.flatnonzero(~fixed)
    warns: list[str] = []
    rec_moving = np.zeros(moving.size, dtype=bool)
    stationary = np.zeros(m, dtype=bool)
    periods = np.zeros(m)
    if moving.size:
        states0 = lift[moving]
        n_steps = int(np.ceil(t_rec / dt_flow))
        left = np.zeros(moving.size, dtype=bool)
        first_return = np.zeros(moving.size)
        max_excursion = np.zeros(moving.size)
        lift_all = est.lift

        def cb(k, states):
            dstart = _rowwise(model.circle_lengths, states, states0)
            reentry = left & (dstart <= r_rec) & (first_return == 0.0)
            first_return[reentry] = k * dt_flow
            np.logical_or(left, dstart > r_rec, out=left)
            if k % 50 == 0:
                dlift = _min_dist_to_set(model.circle_lengths, states, lift_all)
                np.maximum(max_excursion, dlift, out=max_excursion)

        flowmod.rk4_path(model, states0, dt_flow, n_steps, callback=cb)
        rec_moving = left & (first_return > 0.0)
        periods[moving[rec_moving]] = first_return[rec_moving]
        # points that never left the ball recur trivially (numerically stationary)
        rec_moving |= ~left
        stationary[moving] = ~left
        esc = float(np.max(max_excursion, initial=0.0))
        if esc > escape_factor * r_rec:
            warns.append(
                f"flow drifted {esc:.3e} away from the Aubry lift (r_rec = {r_rec:.3e})"
            )

    recurrent = fixed.copy()
    recurrent[moving] |= rec_moving
    rec_idx = np.flatnonzero(recurrent)
    pts = lift[rec_idx]
    classification = _classify(
        model, pts, periods[rec_idx], (fixed | stationary)[rec_idx], r_rec, dt_flow
    )
    for w in warns:
        warnings.warn(w, stacklevel=2)
    return MatherEstimate(pts, rec_idx, periods[rec_idx], classification, warns)


def _rowwise(lengths, a, b):
    d = len(lengths)
    L = np.asarray(lengths)
    dx = np.remainder(a[:, :d] - b[:, :d], L)
    dx = np.minimum(dx, L - dx)
    rest = a[:, d:] - b[:, d:]
    return np.sqrt(np.sum(dx * dx, axis=1) + np.sum(rest * rest, axis=1))


def _min_dist_to_set(lengths, states, ref):
    d = len(lengths)
    L = np.asarray(lengths)
    dx = np.abs(states[:, None, :d] - ref[None, :, :d])
    dx = np.minimum(dx, L - dx)
    rest = states[:, None, d:] - ref[None, :, d:]
    dist = np.sqrt(np.sum(dx * dx, axis=-1) + np.sum(rest * rest, axis=-1))
    return dist.min(axis=1)


def _classify(model, pts, periods, stationary, r_rec, dt_flow) -> str:
    if pts.shape[0] == 0:
        return "empty"
    if bool(np.all(stationary)):
        return "fixed_points"
    if bool(np.any(stationary)):
        return "mixed"
    live = periods[periods > 0]
    if live.size == 0:
        return "mixed"
    period = float(np.median(live))
    if np.max(np.abs(live - period)) > 0.1 * period:
        return "mixed"
    # single orbit: every recurrent point must lie near the orbit through one
    # representative over one period
    rep = pts[0]
    n_steps = int(np.ceil(period / dt_flow)) + 1
    orbit = np.empty((n_steps + 1, pts.shape[1]))
    orbit[0] = rep

    def cb(k, states):
        orbit[k] = states[0]

    flowmod.rk4_path(model, rep[None, :], dt_flow, n_steps, callback=cb)
    worst = float(np.max(_min_dist_to_set(model.circle_lengths, pts, orbit)))
    return "periodic_orbit" if worst <= 3.0 * r_rec else "mixed"


def flow_invariance_defect(
    model: HamiltonianModel,
    est: AubryEstimate,
    horizon: float = 1.0,
    dt_flow: float = 1e-3,
    check_every: int = 25,
) -> float:
    """Max over t in [0, horizon] of the distance from the flowed lift to the
    lift set; small values certify discrete flow invariance of the estimate."""
    n_steps = int(np.ceil(horizon / dt_flow))
    worst = 0.0

    def cb(k, states):
        nonlocal worst
        if k % check_every == 0 or k == n_steps:
            worst = max(
                worst,
                float(np.max(_min_dist_to_set(model.circle_lengths, states, est.lift))),
            )

    flowmod.rk4_path(model, est.lift.copy(), dt_flow, n_steps, callback=cb)
    return worst


def sigma_core_estimate(
    model: HamiltonianModel,
    u_minus: GridField,
    horizon: float = 5.0,
    dt_flow: float = 1e-3,
    core_tol: float | None = None,
    grad_tol: float | None = None,
) -> np.ndarray:
    """Flat node indices whose forward orbit stays on the backward-solution
    pseudograph for the whole horizon: the invariant-core estimate of the
    Aubry set (cross-check for the barrier sublevel estimate)."""
    grid = u_minus.grid
    core_tol = 10.0 * grid.min_spacing if core_tol is None else core_tol
    grad_tol = 10.0 * grid.min_spacing if grad_tol is None else grad_tol
    grad, _ = kink_tolerant_gradient(model, u_minus)
    kinks = flowmod.kink_mask(u_minus, grad_tol).ravel()
    nodes = grid.nodes()
    states = np.concatenate(
        [nodes, u_minus.values.ravel()[:, None], grad.reshape(-1, grid.d)], axis=1
    )
    ok = ~kinks
    idx = np.flatnonzero(ok)
    run = states[idx].copy()
    alive = np.ones(idx.size, dtype=bool)
    n_steps = int(np.ceil(horizon / dt_flow))
    gm_fields = [GridField(grid, grad[..., ax]) for ax in range(grid.d)]

    def cb(k, st):
        if k % 25 and k != n_steps:
            return
        x = st[:, : grid.d]
        uu = interpolate(u_minus, x)
        gap2 = (st[:, grid.d] - uu) ** 2
        for ax in range(grid.d):
            gax = interpolate(gm_fields[ax], x)
            gap2 = gap2 + (st[:, grid.d + 1 + ax] - gax) ** 2
        np.logical_and(alive, np.sqrt(gap2) <= core_tol, out=alive)

    flowmod.rk4_path(model, run, dt_flow, n_steps, callback=cb)
    return idx[alive]


def hausdorff_x(grid, cells_a: np.ndarray, cells_b: np.ndarray) -> float:
    """Hausdorff distance between two projected node sets on the torus."""
    if cells_a.size == 0 or cells_b.size == 0:
        return float("inf")
    a = grid.nodes()[cells_a]
    b = grid.nodes()[cells_b]
    L = np.asarray(grid.lengths)
    dx = np.abs(a[:, None, :] - b[None, :, :])
    dx = np.minimum(dx, L - dx)
    dist = np.sqrt(np.sum(dx * dx, axis=-1))
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))
