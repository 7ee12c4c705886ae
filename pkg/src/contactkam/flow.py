"""Contact flow integration and calibrated curves.

States are packed as [x (d), u, p (d)]. The flow follows the contact
Hamilton equations

    dx/dt = dH/dp,   dp/dt = -dH/dx - (dH/du) p,   du/dt = <p, dH/dp> - H,

integrated with fixed-step classical RK4 (reproducible error budgeting
against closed-form solutions; no adaptivity). Along any orbit
d/dt H = -(dH/du) H, so the zero level of H is invariant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BlowupError, UsageError
from .grids import GridField, gradient_field, interpolate
from .models import ContactPoint, HamiltonianModel
from .weakkam import kink_tolerant_gradient


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # strictly monotone; decreasing for backward runs
    states: np.ndarray  # (len(times), 2d + 1)
    direction: str
    dt_flow: float
    lengths: tuple[float, ...]
    drift: float | None = None  # max |u(t) - field(x(t))| for calibrated runs

    def __post_init__(self):
        d = (self.states.shape[1] - 1) // 2
        if self.states.shape[1] != 2 * d + 1:
            raise UsageError("states must have odd width 2d+1")
        dts = np.diff(self.times)
        if not (np.all(dts > 0) or np.all(dts < 0)):
            raise UsageError("trajectory times must be strictly monotone")
        if not np.all(np.isfinite(self.states)):
            raise UsageError("trajectory states must be finite")

    @property
    def d(self) -> int:
        return (self.states.shape[1] - 1) // 2

    def x(self) -> np.ndarray:
        return self.states[:, : self.d]

    def u(self) -> np.ndarray:
        return self.states[:, self.d]

    def p(self) -> np.ndarray:
        return self.states[:, self.d + 1 :]

    def point(self, i: int) -> ContactPoint:
        d = self.d
        s = self.states[i]
        return ContactPoint(tuple(s[:d]), float(s[d]), tuple(s[d + 1 :]))


def vector_field(model: HamiltonianModel, states: np.ndarray) -> np.ndarray:
    """Right-hand side of the contact Hamilton equations for packed states."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    d = model.d
    x, u, p = states[:, :d], states[:, d], states[:, d + 1 :]
    hx, hu, hp = model.gradients(x, u, p)
    h = model.H(x, u, p)
    out = np.empty_like(states)
    out[:, :d] = hp
    out[:, d] = np.sum(p * hp, axis=-1) - h
    out[:, d + 1 :] = -hx - hu[:, None] * p
    return out


def rk4_path(model: HamiltonianModel, states0: np.ndarray, dt: float, n_steps: int, callback=None):
    """Vectorized fixed-step RK4 over a batch of states; x is wrapped to the
    fundamental domain after each step. callback(step, states) sees every step."""
    states = np.atleast_2d(np.asarray(states0, dtype=float)).copy()
    d = model.d
    L = np.asarray(model.circle_lengths)
    for k in range(1, n_steps + 1):
        k1 = vector_field(model, states)
        k2 = vector_field(model, states + 0.5 * dt * k1)
        k3 = vector_field(model, states + 0.5 * dt * k2)
        k4 = vector_field(model, states + dt * k3)
        states = states + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[:, :d] = np.mod(states[:, :d], L)
        if not np.all(np.isfinite(states)):
            raise BlowupError(
                f"contact flow produced a non-finite state at step {k}",
                t=k * dt,
                last_good=None,
            )
        if callback is not None:
            callback(k, states)
    return states


def _as_state(model, start) -> np.ndarray:
    if isinstance(start, ContactPoint):
        return start.as_array()
    arr = np.asarray(start, dtype=float).ravel()
    if arr.shape != (2 * model.d + 1,):
        raise UsageError(f"start state must have length {2 * model.d + 1}")
    return arr


def integrate(
    model: HamiltonianModel,
    start,
    T: float,
    dt_flow: float = 1e-3,
    direction: str = "forward",
) -> Trajectory:
    """Trajectory of ceil(T/dt_flow)+1 samples of the contact flow."""
    if T <= 0:
        raise UsageError("integration horizon must be positive")
    if direction not in ("forward", "backward"):
        raise UsageError(f"direction must be forward or backward, got {direction!r}")
    s0 = _as_state(model, start)
    d = model.d
    pnorm = float(np.linalg.norm(s0[d + 1 :]))
    if dt_flow > 1e-3 * max(1.0, pnorm) * (1 + 1e-12):
        raise UsageError(
            f"dt_flow = {dt_flow} violates the step guard 1e-3*max(1,|p|) = {1e-3 * max(1.0, pnorm):.3g}"
        )
    n_steps = int(np.ceil(T / dt_flow - 1e-12))
    sgn = 1.0 if direction == "forward" else -1.0
    out = np.full((n_steps + 1, 2 * d + 1), np.nan)
    s0w = s0.copy()
    s0w[:d] = np.mod(s0w[:d], model.circle_lengths)
    out[0] = s0w

    def record(k, states):
        out[k] = states[0]

    try:
        rk4_path(model, s0w[None, :], sgn * dt_flow, n_steps, callback=record)
    except BlowupError as err:
        last = np.max(np.flatnonzero(np.all(np.isfinite(out), axis=1)))
        raise BlowupError(
            str(err), t=err.t, last_good=out[last]
        ) from None
    times = sgn * dt_flow * np.arange(n_steps + 1)
    return Trajectory(times, out, direction, dt_flow, tuple(model.circle_lengths))


def state_distance(lengths, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance in (x,u,p) with the torus metric on x; broadcasts over rows."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d = len(lengths)
    L = np.asarray(lengths)
    dx = np.remainder(a[:, :d] - b[:, :d], L)
    dx = np.minimum(dx, L - dx)
    rest = a[:, d:] - b[:, d:]
    return np.sqrt(np.sum(dx * dx, axis=1) + np.sum(rest * rest, axis=1))


def kink_mask(u: GridField, grad_tol: float) -> np.ndarray:
    """Nodes where the one-sided gradients jump by more than grad_tol on some axis."""
    left = gradient_field(u, "left")
    right = gradient_field(u, "right")
    return np.any(np.abs(right - left) > grad_tol, axis=-1)


def _interp_vec_field(grid, vec_field: np.ndarray, x) -> np.ndarray:
    out = np.empty(vec_field.shape[-1])
    for ax in range(vec_field.shape[-1]):
        out[ax] = interpolate(GridField(grid, vec_field[..., ax]), x)
    return out


def seed_from_field(model: HamiltonianModel, u: GridField, x, grad_tol: float | None = None):
    """Starting contact state (x, u(x), Du(x)) with the kink-tolerant gradient.

    Starts at kinks are refused rather than smoothed: differentiability is
    only guaranteed along calibrated curves.
    """
    grid = u.grid
    grad_tol = 10.0 * grid.min_spacing if grad_tol is None else grad_tol
    x = grid.wrap(np.atleast_1d(np.asarray(x, dtype=float)))
    kinks = kink_mask(u, grad_tol)
    if kinks.any():
        knodes = grid.nodes()[kinks.ravel()]
        dmin = float(np.min(grid.torus_dist(knodes, x[None, :])))
        if dmin < 2.0 * grid.min_spacing:
            raise UsageError(
                f"start point {tuple(x)} is within 2h of a kink of the field "
                f"(nearest kink node at distance {dmin:.3g})"
            )
    grad, _ = kink_tolerant_gradient(model, u)
    u0 = float(interpolate(u, x))
    p0 = _interp_vec_field(grid, grad, x)
    state = np.concatenate([x, [u0], p0])
    return state


def calibrated_backward(
    model: HamiltonianModel,
    u_minus: GridField,
    x,
    T: float,
    dt_flow: float = 1e-3,
    grad_tol: float | None = None,
    drift_tol: float | None = None,
) -> Trajectory:
    """Characteristic of u_-: start at (x, u_-(x), Du_-(x)), integrate
    backward in time; the u-component is compared against u_- along the path."""
    return _calibrated(model, u_minus, x, T, dt_flow, "backward", grad_tol, drift_tol)


def calibrated_forward(
    model: HamiltonianModel,
    v_plus: GridField,
    x,
    T: float,
    dt_flow: float = 1e-3,
    grad_tol: float | None = None,
    drift_tol: float | None = None,
) -> Trajectory:
    """Forward calibrated curve of a forward solution v_+."""
    return _calibrated(model, v_plus, x, T, dt_flow, "forward", grad_tol, drift_tol)


def _calibrated(model, fld, x, T, dt_flow, direction, grad_tol, drift_tol):
    state = seed_from_field(model, fld, x, grad_tol)
    traj = integrate(model, state, T, dt_flow, direction)
    drift = float(np.max(np.abs(traj.u() - interpolate(fld, traj.x()))))
    if drift_tol is None:
        drift_tol = 0.2
    if drift > drift_tol:
        warnings.warn(
            f"calibrated curve drifted off the field: max |u(t) - field(x(t))| = {drift:.3e}",
            stacklevel=2,
        )
    return Trajectory(traj.times, traj.states, traj.direction, traj.dt_flow, traj.lengths, drift)


def calibration_defect(model: HamiltonianModel, u: GridField, traj: Trajectory) -> float:
    """Max over sample prefixes of |u(x(t)) - u(x(t0)) - int L(x, u(x), dx/dt) dt|
    with trapezoidal quadrature; velocities come from dH/dp along the orbit."""
    order = np.argsort(traj.times)
    times = traj.times[order]
    states = traj.states[order]
    d = traj.d
    xs = states[:, :d]
    uf = interpolate(u, xs)
    _, _, hp = model.gradients(xs, states[:, d], states[:, d + 1 :])
    lvals = model.L(xs, uf, hp)
    dts = np.diff(times)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dts * (lvals[1:] + lvals[:-1]))])
    return float(np.max(np.abs(uf - uf[0] - cum)))


def barrier_along(model: HamiltonianModel, barrier: GridField, traj: Trajectory):
    """Sampled barrier values along the curve and the max upward violation of
    monotone decrease."""
    vals = interpolate(barrier, traj.x())
    violation = float(np.max(np.diff(vals), initial=0.0))
    return list(zip(traj.times.tolist(), vals.tolist())), max(0.0, violation)


def limit_set(traj: Trajectory, tail_fraction: float = 0.2, cluster_radius: float = 1e-2):
    """Cluster the trajectory tail by radius; returns cluster representatives.

    The tail is the last samples in the trajectory's own time order, i.e. the
    omega-limit end of a forward run and the alpha-limit end of a backward run.
    """
    m = len(traj.times)
    tail = int(np.ceil(tail_fraction * m))
    if tail < 100:
        raise UsageError(f"tail window has {tail} samples; need at least 100")
    pts = traj.states[-tail:]
    reps: list[np.ndarray] = []
    for s in pts:
        if not reps or np.min(state_distance(traj.lengths, np.asarray(reps), s[None, :])) > cluster_radius:
            reps.append(s)
    d = traj.d
    return [ContactPoint(tuple(s[:d]), float(s[d]), tuple(s[d + 1 :])) for s in reps]
