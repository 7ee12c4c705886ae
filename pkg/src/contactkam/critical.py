"""Classical (frozen-u) Lax-Oleinik machinery, Mane critical values, and the
admissibility diagnostics.

Freezing the u-argument of the Lagrangian at a level a gives the classical
operator for L(x, a, v); its long-time evolution drifts linearly at rate
-c(H^a), the Mane critical value of the frozen Hamiltonian, up to a bounded
oscillation. c is estimated by a least-squares fit of the spatial mean over
the trailing half of the run; admissibility (existence of a with c(H^a) = 0)
is located by bisection, using that a -> c(H^a) is nondecreasing when
dH/du >= 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .action import DELTA_INIT_DEFAULT, init_action
from .errors import BlowupError, UsageError
from .grids import GridField, PeriodicGrid
from .models import HamiltonianModel
from .semigroup import StepOperator

A_BRACKET_DEFAULT = (-10.0, 10.0)


def frozen_backward_step(
    model: HamiltonianModel, a: float, f: GridField, dt: float, **op_kwargs
) -> GridField:
    """One backward step with the u-argument of L frozen at a."""
    op = StepOperator(model, f.grid, dt, "backward", freeze_u=a, **op_kwargs)
    return op(f)


@dataclass
class CriticalEstimate:
    a: float
    c: float
    fit_residual: float
    times: np.ndarray = field(repr=False)
    means: np.ndarray = field(repr=False)
    flagged: bool = False


def mane_critical_value(
    model: HamiltonianModel,
    a: float,
    grid: PeriodicGrid,
    dt: float = 5e-3,
    t_avg: float = 10.0,
    fit_warn: float = 5e-2,
    **op_kwargs,
) -> CriticalEstimate:
    """c(H^a) from the linear value drift of the frozen evolution of f = 0.

    The frozen action stays within a fixed band of -c t, so the slope of the
    spatial mean over the second half of the run estimates -c; a poor linear
    fit is flagged with a warning.
    """
    if t_avg < 5.0:
        raise UsageError("t_avg must be at least 5 for a stable drift estimate")
    op = StepOperator(model, grid, dt, "backward", freeze_u=a, **op_kwargs)
    n_steps = int(round(t_avg / dt))
    vals = np.zeros(grid.n)
    means = np.empty(n_steps)
    for k in range(n_steps):
        vals = op.apply(vals)
        means[k] = vals.mean()
    times = dt * np.arange(1, n_steps + 1)
    half = n_steps // 2
    coef = np.polyfit(times[half:], means[half:], 1)
    resid = float(np.max(np.abs(np.polyval(coef, times[half:]) - means[half:])))
    flagged = resid > fit_warn
    if flagged:
        warnings.warn(
            f"frozen drift is not linear (fit residual {resid:.3e}); "
            "the critical-value estimate is unreliable",
            stacklevel=2,
        )
    return CriticalEstimate(float(a), float(-coef[0]), resid, times, means, flagged)


@dataclass
class AdmissibleResult:
    a_star: float
    c_star: float
    iterations: int
    history: list  # (a, c) pairs evaluated


def find_admissible_level(
    model: HamiltonianModel,
    grid: PeriodicGrid,
    a_lo: float = A_BRACKET_DEFAULT[0],
    a_hi: float = A_BRACKET_DEFAULT[1],
    tol_a: float = 1e-3,
    tol_c: float = 5e-3,
    dt: float = 5e-3,
    t_avg: float = 10.0,
    **op_kwargs,
) -> AdmissibleResult:
    """Bisection for a* with c(H^{a*}) = 0; requires c(a_lo) < 0 < c(a_hi)."""
    if not a_lo < a_hi:
        raise UsageError("need a_lo < a_hi")

    def c_of(a):
        return mane_critical_value(model, a, grid, dt, t_avg, **op_kwargs).c

    history = []
    c_lo = c_of(a_lo)
    history.append((a_lo, c_lo))
    c_hi = c_of(a_hi)
    history.append((a_hi, c_hi))
    if not (c_lo < 0.0 < c_hi):
        raise UsageError(
            f"admissibility bracket failed: c({a_lo}) = {c_lo:.4g}, c({a_hi}) = {c_hi:.4g}; "
            "the family is not admissible in this range"
        )
    iterations = 0
    while a_hi - a_lo > tol_a:
        mid = 0.5 * (a_lo + a_hi)
        c_mid = c_of(mid)
        history.append((mid, c_mid))
        iterations += 1
        if abs(c_mid) <= tol_c:
            return AdmissibleResult(mid, c_mid, iterations, history)
        if c_mid > 0.0:
            a_hi = mid
        else:
            a_lo = mid
    mid = 0.5 * (a_lo + a_hi)
    c_mid = c_of(mid)
    history.append((mid, c_mid))
    return AdmissibleResult(mid, c_mid, iterations + 1, history)


@dataclass
class BoundednessReport:
    bounded: bool
    verdict: str  # admissible-consistent | drifting | blowup
    drift: float
    sup_series: list  # (t, min, max)
    t_end: float


def boundedness_check(
    model: HamiltonianModel,
    grid: PeriodicGrid,
    x0,
    u0: float,
    delta: float = DELTA_INIT_DEFAULT,
    t_max: float = 10.0,
    dt: float = 2e-3,
    drift_tol: float = 5e-2,
    record_every: int = 25,
    **op_kwargs,
) -> BoundednessReport:
    """Propagate the forward action slice from (x0, u0) and watch its range.

    Admissible-consistent behavior is a bounded slice drifting to a limit;
    a sustained linear drift (the frozen/non-admissible signature) or a
    blowup is flagged.
    """
    if delta < 1e-12:
        raise UsageError("delta must be positive")
    slc = init_action(model, grid, x0, u0, delta, "forward_h")
    op = StepOperator(model, grid, dt, "backward", **op_kwargs)
    n_steps = int(round((t_max - delta) / dt))
    vals = slc.values.values
    series = []
    means = []
    times = []
    try:
        for k in range(1, n_steps + 1):
            vals = op.apply(vals)
            t = delta + k * dt
            means.append(vals.mean())
            times.append(t)
            if k % record_every == 0 or k == n_steps:
                series.append((t, float(vals.min()), float(vals.max())))
            if np.max(np.abs(vals)) > 1e6:
                raise BlowupError("boundedness check hit the blowup guard", t=t)
    except BlowupError:
        return BoundednessReport(False, "blowup", float("nan"), series, times[-1] if times else delta)
    half = len(times) // 2
    coef = np.polyfit(times[half:], means[half:], 1)
    drift = float(coef[0])
    if abs(drift) > drift_tol:
        return BoundednessReport(False, "drifting", drift, series, times[-1])
    return BoundednessReport(True, "admissible-consistent", drift, series, times[-1])
