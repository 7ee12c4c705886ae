"""Discrete backward and forward solution semigroups.

One step of the backward operator assigns to each node x

    min over candidate velocities v of
        f(x - v dt) + dt * L(x - v dt, f(x - v dt), v)

(left-endpoint quadrature, explicit in u: L sees the known field value at the
known departure point). The forward operator is the dual max with departure
x + v dt and a minus sign on L. Candidates live on a lattice of radius v_max
with n_v points per axis, followed by one quadratic refinement around the
best lattice candidate; exact ties pick the smallest |v|, then the positive
axis direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BlowupError, NumericalError, UsageError
from .grids import GridField, PeriodicGrid
from .models import HamiltonianModel

DT_MAX_DEFAULT = 5e-3
BLOWUP_GUARD_DEFAULT = 1e6

_DIRECTIONS = ("backward", "forward")


class StepOperator:
    """Reusable one-step operator bound to (model, grid, dt, direction).

    Departure points, their potential values, and the kinetic conjugate on
    the velocity lattice depend only on the binding, so they are precomputed
    once; each step then reduces to interpolation gathers plus arithmetic.
    `freeze_u` evaluates the Lagrangian at a fixed value of u (the classical,
    u-independent operator used by the critical-value machinery).
    """

    def __init__(
        self,
        model: HamiltonianModel,
        grid: PeriodicGrid,
        dt: float,
        direction: str,
        n_v: int = 33,
        v_max: float | None = None,
        refine: bool = True,
        dt_max: float = DT_MAX_DEFAULT,
        freeze_u: float | None = None,
        backend: str | None = None,
    ):
        if direction not in _DIRECTIONS:
            raise UsageError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
        if not dt > 0:
            raise UsageError(f"dt must be positive, got {dt}")
        if dt > dt_max * (1 + 1e-12):
            raise UsageError(f"dt = {dt} exceeds dt_max = {dt_max}")
        if model.d != grid.d or tuple(model.circle_lengths) != tuple(grid.lengths):
            raise UsageError("model circle_lengths and grid lengths disagree")
        if n_v < 3:
            raise UsageError(f"n_v must be at least 3, got {n_v}")
        v_max = model.v_max if v_max is None else float(v_max)
        if v_max * dt > 4.0 * grid.min_spacing * (1 + 1e-12):
            raise UsageError(
                f"locality guard violated: v_max*dt = {v_max * dt:.3g} exceeds "
                f"4h = {4.0 * grid.min_spacing:.3g}; lower dt or v_max, or refine the grid"
            )

        self.model = model
        self.grid = grid
        self.dt = float(dt)
        self.direction = direction
        self.forward = direction == "forward"
        self.n_v = int(n_v)
        self.v_max = v_max
        self.refine = bool(refine)
        self.freeze_u = freeze_u

        d = grid.d
        vax = np.linspace(-v_max, v_max, self.n_v)
        coords = np.stack(
            [m.ravel() for m in np.meshgrid(*([np.arange(self.n_v)] * d), indexing="ij")],
            axis=1,
        )
        vel = vax[coords]
        vsq = np.sum(vel * vel, axis=1)
        # sort by |v| then positive-direction preference; first occurrence in
        # the scan then realizes the tie-break
        keys = tuple(-vel[:, ax] for ax in reversed(range(d))) + (vsq,)
        order = np.lexsort(keys)
        self.vel = np.ascontiguousarray(vel[order])
        coords = coords[order]
        m = len(self.vel)

        coord_to_idx = np.full((self.n_v,) * d, -1, dtype=np.int64)
        coord_to_idx[tuple(coords.T)] = np.arange(m)
        self._nbr = []
        for ax in range(d):
            lo = coords.copy()
            hi = coords.copy()
            lo[:, ax] -= 1
            hi[:, ax] += 1
            lo_idx = np.where(lo[:, ax] >= 0, coord_to_idx[tuple(np.clip(lo, 0, self.n_v - 1).T)], -1)
            hi_idx = np.where(
                hi[:, ax] < self.n_v, coord_to_idx[tuple(np.clip(hi, 0, self.n_v - 1).T)], -1
            )
            self._nbr.append((lo_idx, hi_idx))
        self.dv = 2.0 * v_max / (self.n_v - 1)

        sign = 1.0 if self.forward else -1.0
        self._sign = sign
        off = sign * self.vel * dt
        h = np.asarray(grid.spacing)
        q = off / h
        qf = np.floor(q)
        ishift = qf.astype(np.int64)
        frac = q - qf
        self._nodes = grid.nodes()

        # integer node indices per axis, for shift-exact refined interpolation
        idx_mesh = np.meshgrid(*[np.arange(ni, dtype=np.int64) for ni in grid.n], indexing="ij")
        self._node_idx = np.stack([ix.ravel() for ix in idx_mesh], axis=1)

        kappa_eff = 0.0 if freeze_u is not None else model.kappa
        self._kappa_eff = kappa_eff
        pot_dep = np.empty((m,) + tuple(grid.n))
        for k in range(m):
            y = grid.wrap(self._nodes + off[k])
            pot_dep[k] = self._pot_eff(y).reshape(grid.n)
        ke = model.ke(self.vel)
        if grid.d == 1:
            ishift = ishift[:, 0]
            frac = frac[:, 0]
        self._stepper = kernels.make_stepper(
            pot_dep, ke, ishift, frac, kappa_eff, dt, self.forward, backend=backend
        )
        self._backend = backend

    def _pot_eff(self, y):
        pot = self.model.pot(y)
        if self.freeze_u is not None:
            pot = pot + self.model.kappa * self.freeze_u
        return pot

    def apply(self, vals: np.ndarray) -> np.ndarray:
        """Advance raw nodal values by one step."""
        best, bestk = self._stepper.scan(vals)
        if self.refine:
            best = self._refined(vals, best, bestk)
        if not np.all(np.isfinite(best)):
            raise NumericalError("semigroup step produced non-finite values")
        return best

    def __call__(self, f: GridField) -> GridField:
        if f.grid != self.grid:
            raise UsageError("field grid does not match the operator grid")
        return GridField(self.grid, self.apply(f.values))

    def _refined(self, vals, best, bestk):
        """One quadratic refinement around the best lattice candidate.

        The parabola through the candidate and its two lattice neighbours is
        minimized (maximized forward); the refined value replaces the lattice
        one only when strictly better, so tie-breaking stays deterministic.
        """
        flatk = bestk.ravel()
        phi0 = best.ravel()
        nn = phi0.shape[0]
        vref = self.vel[flatk].copy()
        changed = np.zeros(nn, dtype=bool)
        for ax in range(self.grid.d):
            lo_idx, hi_idx = self._nbr[ax]
            klo = lo_idx[flatk]
            khi = hi_idx[flatk]
            ok = (klo >= 0) & (khi >= 0)
            if not ok.any():
                continue
            plo = self._stepper.phi_rows(vals, np.where(ok, klo, 0).reshape(self.grid.n)).ravel()
            phi = self._stepper.phi_rows(vals, np.where(ok, khi, 0).reshape(self.grid.n)).ravel()
            denom = plo - 2.0 * phi0 + phi
            good = ok & ((denom < 0) if self.forward else (denom > 0))
            if not good.any():
                continue
            delta = np.zeros(nn)
            delta[good] = 0.5 * (plo[good] - phi[good]) / denom[good] * self.dv
            np.clip(delta, -self.dv, self.dv, out=delta)
            vref[:, ax] += delta
            changed |= delta != 0.0
        if not changed.any():
            return best
        idx = np.nonzero(changed)[0]
        vc = vref[idx]
        # gather at refined departure points with integer shift plus a
        # node-independent fraction, so whole-node translates of the field
        # commute with the step exactly
        off = self._sign * vc * self.dt / np.asarray(self.grid.spacing)
        qf = np.floor(off)
        w = off - qf
        base = self._node_idx[idx] + qf.astype(np.int64)
        if self.grid.d == 1:
            n0 = self.grid.n[0]
            i0 = base[:, 0] % n0
            i1 = (i0 + 1) % n0
            fd = (1.0 - w[:, 0]) * vals[i0] + w[:, 0] * vals[i1]
        else:
            n0, n1 = self.grid.n
            a0 = base[:, 0] % n0
            a1 = (a0 + 1) % n0
            b0 = base[:, 1] % n1
            b1 = (b0 + 1) % n1
            w0, w1 = w[:, 0], w[:, 1]
            fd = (
                (1.0 - w0) * (1.0 - w1) * vals[a0, b0]
                + w0 * (1.0 - w1) * vals[a1, b0]
                + (1.0 - w0) * w1 * vals[a0, b1]
                + w0 * w1 * vals[a1, b1]
            )
        y = self.grid.wrap(self._nodes[idx] + self._sign * vc * self.dt)
        lref = self.model.ke(vc) - self._pot_eff(y)
        if self.forward:
            phiref = fd * (1.0 + self._kappa_eff * self.dt) - self.dt * lref
            better = phiref > phi0[idx]
        else:
            phiref = fd * (1.0 - self._kappa_eff * self.dt) + self.dt * lref
            better = phiref < phi0[idx]
        if not better.any():
            return best
        out = phi0.copy()
        out[idx[better]] = phiref[better]
        return out.reshape(self.grid.n)


def backward_step(
    model: HamiltonianModel, f: GridField, dt: float, **kwargs
) -> GridField:
    """One step of the discrete backward solution semigroup."""
    return StepOperator(model, f.grid, dt, "backward", **kwargs)(f)


def forward_step(model: HamiltonianModel, f: GridField, dt: float, **kwargs) -> GridField:
    """One step of the discrete forward solution semigroup."""
    return StepOperator(model, f.grid, dt, "forward", **kwargs)(f)


@dataclass
class EvolveResult:
    field: GridField
    steps: int
    t: float
    history: list  # (step, t, sup_change, min, max) when recorded


def evolve(
    model: HamiltonianModel,
    f0: GridField,
    direction: str,
    horizon: float,
    dt: float,
    observer=None,
    blowup_guard: float = BLOWUP_GUARD_DEFAULT,
    operator: StepOperator | None = None,
    record_history: bool = False,
    **kwargs,
) -> EvolveResult:
    """Iterate the chosen step ceil(horizon/dt) times (dt must divide horizon
    within rounding). The observer receives (step index, t, field values).

    Aborts with BlowupError when the sup norm exceeds blowup_guard, the
    expected outcome of forward evolution from generic data.
    """
    if horizon < 0:
        raise UsageError(f"horizon must be nonnegative, got {horizon}")
    if horizon == 0:
        return EvolveResult(field=f0, steps=0, t=0.0, history=[])
    n_steps = int(round(horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-9 * max(1.0, abs(horizon)):
        raise UsageError(f"dt = {dt} does not divide horizon = {horizon} within rounding")
    op = operator or StepOperator(model, f0.grid, dt, direction, **kwargs)
    vals = f0.values
    history = []
    for step in range(1, n_steps + 1):
        new_vals = op.apply(vals)
        sup_change = float(np.max(np.abs(new_vals - vals)))
        vals = new_vals
        t = step * dt
        sup = float(np.max(np.abs(vals)))
        if sup > blowup_guard:
            raise BlowupError(
                f"evolution diverged: sup norm {sup:.3e} exceeded guard {blowup_guard:.3e} at t = {t:.6g}",
                t=t,
                sup=sup,
                last_good=GridField(f0.grid, vals),
            )
        if record_history:
            history.append((step, t, sup_change, float(vals.min()), float(vals.max())))
        if observer is not None:
            observer(step, t, vals)
    return EvolveResult(field=GridField(f0.grid, vals), steps=n_steps, t=n_steps * dt, history=history)


def write_history_csv(history, path) -> None:
    """Observer history rows: step,t,sup_change,min,max."""
    with open(path, "w") as fh:
        fh.write("step,t,sup_change,min,max\n")
        for step, t, ch, lo, hi in history:
            fh.write(f"{step},{t:.17g},{ch:.17g},{lo:.17g},{hi:.17g}\n")
