"""Implicit action functions and their calculus.

A forward slice holds h_{x0,u0}(., t): the minimal terminal value over curves
leaving x0 with initial value u0; a backward slice holds the dual
h^{x0,u0}(., t). Slices are initialized at a small time delta by a
one-segment action along the shortest torus path and advanced by the matching
solution semigroup: the backward semigroup pushes forward slices ahead in t,
the forward semigroup pushes backward slices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .grids import GridField, PeriodicGrid, interpolate
from .models import HamiltonianModel
from .semigroup import StepOperator, evolve

DELTA_INIT_DEFAULT = 1e-2


@dataclass(frozen=True)
class ActionSlice:
    base_x: tuple[float, ...]
    base_u: float
    t: float
    values: GridField
    kind: str  # forward_h | backward_h

    def __post_init__(self):
        if self.kind not in ("forward_h", "backward_h"):
            raise UsageError(f"slice kind must be forward_h or backward_h, got {self.kind!r}")
        if not self.t > 0:
            raise UsageError("slice time must be positive")

    def at(self, x) -> float:
        return float(interpolate(self.values, x))


def _one_segment_values(model, grid, x0, u0, delta):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    nodes = grid.nodes()
    disp = grid.shortest_disp(x0[None, :], nodes)
    mid = grid.wrap(x0[None, :] + 0.5 * disp)
    v = disp / delta
    return model.L(mid, u0, v)


def init_action(
    model: HamiltonianModel,
    grid: PeriodicGrid,
    x0,
    u0: float,
    delta: float = DELTA_INIT_DEFAULT,
    kind: str = "forward_h",
) -> ActionSlice:
    """One-segment short-time slice at t = delta.

    Forward: node gets u0 + delta * L(midpoint, u0, disp/delta); backward uses
    the dual sign. Far nodes receive large values (superlinear growth), which
    is the correct short-time behavior.
    """
    if not 0 < delta:
        raise UsageError("delta must be positive")
    lvals = _one_segment_values(model, grid, x0, u0, delta)
    sign = 1.0 if kind == "forward_h" else -1.0
    vals = (u0 + sign * delta * lvals).reshape(grid.n)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    return ActionSlice(tuple(grid.wrap(x0)), float(u0), float(delta), GridField(grid, vals), kind)


def propagate_action(
    model: HamiltonianModel,
    slc: ActionSlice,
    horizon: float,
    dt: float,
    operator: StepOperator | None = None,
    **op_kwargs,
) -> ActionSlice:
    """Advance a slice from t to t + horizon with the matching semigroup."""
    if horizon == 0:
        return slc
    direction = "backward" if slc.kind == "forward_h" else "forward"
    res = evolve(model, slc.values, direction, horizon, dt, operator=operator, **op_kwargs)
    return ActionSlice(slc.base_x, slc.base_u, slc.t + res.t, res.field, slc.kind)


def forward_action(
    model: HamiltonianModel,
    grid: PeriodicGrid,
    x0,
    u0: float,
    t: float,
    dt: float,
    delta: float = DELTA_INIT_DEFAULT,
    **op_kwargs,
) -> ActionSlice:
    """h_{x0,u0}(., t): init at delta, then backward-semigroup evolve."""
    if t < delta:
        raise UsageError(f"slice time {t} is smaller than the init time {delta}")
    slc = init_action(model, grid, x0, u0, delta, "forward_h")
    return propagate_action(model, slc, t - delta, dt, **op_kwargs)


def backward_action(
    model: HamiltonianModel,
    grid: PeriodicGrid,
    x_from,
    u_from: float,
    horizon: float,
    dt: float,
    delta: float = DELTA_INIT_DEFAULT,
    **op_kwargs,
) -> ActionSlice:
    """h^{x_from,u_from}(., delta + horizon) via the forward semigroup."""
    slc = init_action(model, grid, x_from, u_from, delta, "backward_h")
    return propagate_action(model, slc, horizon, dt, **op_kwargs)


def check_reversibility(
    model: HamiltonianModel,
    grid: PeriodicGrid,
    x0,
    u0: float,
    x,
    t: float,
    dt: float,
    delta: float = DELTA_INIT_DEFAULT,
    **op_kwargs,
) -> float:
    """|h^{x,u}(x0,t) - u0| with u = h_{x0,u0}(x,t); exactly zero in the
    continuum by the forward/backward equivalence."""
    if t < 2 * delta:
        raise UsageError("reversibility check needs t >= 2*delta")
    fwd = forward_action(model, grid, x0, u0, t, dt, delta, **op_kwargs)
    u = fwd.at(x)
    back = backward_action(model, grid, x, u, t - delta, dt, delta, **op_kwargs)
    u0_back = back.at(x0)
    return abs(u0_back - u0)


def markov_defect(
    model: HamiltonianModel,
    grid: PeriodicGrid,
    x0,
    u0: float,
    t: float,
    s: float,
    dt: float,
    delta: float = DELTA_INIT_DEFAULT,
    y_count: int = 32,
    x_count: int = 16,
    **op_kwargs,
) -> float:
    """Cross-validate h(., t+s) against the two-stage composition
    min over y of h_{y, h(y,t)}(., s) on a node subsample of y and x."""
    if t < delta or s < delta:
        raise UsageError("markov split needs t, s >= delta")
    slice_t = forward_action(model, grid, x0, u0, t, dt, delta, **op_kwargs)
    direct = propagate_action(model, slice_t, s, dt, **op_kwargs)

    nodes = grid.nodes()
    flat_vals = slice_t.values.values.ravel()
    y_idx = np.linspace(0, grid.num_nodes, y_count, endpoint=False).astype(int)
    x_idx = np.linspace(0, grid.num_nodes, x_count, endpoint=False).astype(int)
    two_stage = np.full(grid.num_nodes, np.inf)
    for j in y_idx:
        inner = forward_action(
            model, grid, nodes[j], float(flat_vals[j]), s, dt, delta, **op_kwargs
        )
        two_stage = np.minimum(two_stage, inner.values.values.ravel())
    return float(np.max(np.abs(direct.values.values.ravel()[x_idx] - two_stage[x_idx])))
