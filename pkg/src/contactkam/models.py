"""Contact Hamiltonian families on flat tori and their Lagrangians.

Every built-in family has the separable form

    H(x, u, p) = kin(|p - b|) + kappa * u + pot(x),
    kin(r) = quad * r^2 / 2 + p4 * r^4,

which is strictly convex and superlinear in p for quad > 0, p4 >= 0, and has
constant dH/du = kappa. The Legendre transform in the velocity is then

    L(x, u, v) = <b, v> + kin*(|v|) - pot(x) - kappa * u,

with kin* the convex conjugate of the radial kinetic part. For quadratic
families (p4 = 0) the conjugate is closed form; otherwise it is computed by
damped Newton ascent in p (the objective is strictly concave).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, UsageError

FAMILIES = (
    "quadratic_contact",
    "manufactured",
    "pendulum_dissipative",
    "discounted_mechanical",
    "custom_coefficients",
)

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ContactPoint:
    """A state (x, u, p); x is reduced to the fundamental domain."""

    x: tuple[float, ...]
    u: float
    p: tuple[float, ...]

    def __post_init__(self):
        if len(self.x) != len(self.p):
            raise UsageError("x and p must have the same dimension")
        if not all(np.isfinite(v) for v in (*self.x, self.u, *self.p)):
            raise UsageError("contact point must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([*self.x, self.u, *self.p], dtype=float)


@dataclass(frozen=True)
class HamiltonianModel:
    """One member of a contact Hamiltonian family.

    lambda_bound is the constant of the moderate-increase assumption
    (0 < dH/du <= lambda_bound); v_max is the velocity radius outside which
    the one-step Lagrangian minimization is never attained.
    """

    family: str
    params: dict = field(default_factory=dict)
    lambda_bound: float = 1.0
    v_max: float = 8.0
    circle_lengths: tuple[float, ...] = (1.0,)
    # separable-form coefficients, resolved by make_model
    quad: float = 1.0
    p4: float = 0.0
    kappa: float = 1.0
    drift: tuple[float, ...] = (0.0,)

    @property
    def d(self) -> int:
        return len(self.circle_lengths)

    @property
    def waves(self) -> np.ndarray:
        return _TWO_PI / np.asarray(self.circle_lengths)

    def point(self, x, u, p) -> ContactPoint:
        x = np.mod(np.atleast_1d(np.asarray(x, dtype=float)), self.circle_lengths)
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return ContactPoint(tuple(x), float(u), tuple(p))

    # -- potential part ------------------------------------------------

    def _w_parts(self, x: np.ndarray):
        """Manufactured target W with gradient and Hessian at x (batch)."""
        amp = self.params.get("amplitude", 0.3)
        k = self.waves
        if self.d == 1:
            c = np.cos(k[0] * x[..., 0])
            s = np.sin(k[0] * x[..., 0])
            w = amp * c
            grad = np.stack([-amp * k[0] * s], axis=-1)
            hess = (-amp * k[0] ** 2 * c)[..., None, None]
            return w, grad, hess
        c0 = np.cos(k[0] * x[..., 0])
        s0 = np.sin(k[0] * x[..., 0])
        c1 = np.cos(k[1] * x[..., 1])
        s1 = np.sin(k[1] * x[..., 1])
        w = amp * c0 * c1
        grad = np.stack([-amp * k[0] * s0 * c1, -amp * k[1] * c0 * s1], axis=-1)
        hess = np.empty(x.shape[:-1] + (2, 2))
        hess[..., 0, 0] = -amp * k[0] ** 2 * c0 * c1
        hess[..., 1, 1] = -amp * k[1] ** 2 * c0 * c1
        hess[..., 0, 1] = hess[..., 1, 0] = amp * k[0] * k[1] * s0 * s1
        return w, grad, hess

    def pot(self, x: np.ndarray) -> np.ndarray:
        """Potential term of H at positions x, shape (..., d) -> (...)."""
        x = np.asarray(x, dtype=float)
        if self.family == "quadratic_contact":
            return np.zeros(x.shape[:-1])
        if self.family == "manufactured":
            w, grad, _ = self._w_parts(x)
            return -(w + 0.5 * np.sum(grad * grad, axis=-1))
        if self.family == "pendulum_dissipative":
            return np.cos(self.waves[0] * x[..., 0])
        if self.family == "discounted_mechanical":
            v0 = self.params.get("v0", 1.0)
            c0 = self.params.get("c0", 0.0)
            return v0 * np.sum(np.cos(self.waves * x), axis=-1) - c0
        # custom_coefficients
        amp = self.params.get("amplitude", 0.0)
        off = self.params.get("offset", 0.0)
        return amp * np.sum(np.cos(self.waves * x), axis=-1) + off

    def pot_grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.family == "quadratic_contact":
            return np.zeros_like(x)
        if self.family == "manufactured":
            _, grad, hess = self._w_parts(x)
            return -(grad + np.einsum("...ij,...j->...i", hess, grad))
        if self.family == "pendulum_dissipative":
            return np.stack([-self.waves[0] * np.sin(self.waves[0] * x[..., 0])], axis=-1)
        if self.family == "discounted_mechanical":
            v0 = self.params.get("v0", 1.0)
            return -v0 * self.waves * np.sin(self.waves * x)
        amp = self.params.get("amplitude", 0.0)
        return -amp * self.waves * np.sin(self.waves * x)

    # -- Hamiltonian side ----------------------------------------------

    def H(self, x, u, p) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        q = p - np.asarray(self.drift)
        r2 = np.sum(q * q, axis=-1)
        kin = 0.5 * self.quad * r2 + self.p4 * r2 * r2
        return kin + self.kappa * np.asarray(u, dtype=float) + self.pot(x)

    def gradients(self, x, u, p):
        """(dH/dx, dH/du, dH/dp) at a batch of states."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        q = p - np.asarray(self.drift)
        r2 = np.sum(q * q, axis=-1)
        hp = (self.quad + 4.0 * self.p4 * r2)[..., None] * q
        hx = self.pot_grad(x)
        hu = np.broadcast_to(self.kappa, r2.shape).copy()
        return hx, hu, hp

    def hess_pp_min_eig(self, p) -> np.ndarray:
        """Smallest eigenvalue of d^2H/dp^2 (closed form for the radial kinetic part)."""
        p = np.asarray(p, dtype=float)
        q = p - np.asarray(self.drift)
        r2 = np.sum(q * q, axis=-1)
        if self.d == 1:
            return self.quad + 12.0 * self.p4 * r2
        return self.quad + 4.0 * self.p4 * r2

    # -- Lagrangian side -----------------------------------------------

    def ke(self, v) -> np.ndarray:
        """Kinetic conjugate KE(v) = sup_p <v,p> - kin(|p-b|), vectorized.

        Uses the closed-form conjugate for p4 = 0 and the real root of the
        radial cubic (Cardano) otherwise.
        """
        v = np.asarray(v, dtype=float)
        bv = np.sum(np.asarray(self.drift) * v, axis=-1)
        r = np.sqrt(np.sum(v * v, axis=-1))
        if self.p4 == 0.0:
            if self.quad <= 0.0:
                raise NumericalError("Lagrangian undefined: H is not convex in p")
            return bv + 0.5 * r * r / self.quad
        pc = self.quad / (4.0 * self.p4)
        qc = -r / (4.0 * self.p4)
        disc = np.sqrt(qc * qc / 4.0 + pc**3 / 27.0)
        s = np.cbrt(-qc / 2.0 + disc) + np.cbrt(-qc / 2.0 - disc)
        return bv + r * s - 0.5 * self.quad * s * s - self.p4 * s**4

    def L(self, x, u, v) -> np.ndarray:
        return self.ke(v) - self.pot(np.asarray(x, dtype=float)) - self.kappa * np.asarray(
            u, dtype=float
        )


def make_model(
    family: str,
    circle_lengths=None,
    v_max: float | None = None,
    lambda_bound: float | None = None,
    **params,
) -> HamiltonianModel:
    """Build a model, resolving separable-form coefficients and defaults."""
    if family not in FAMILIES:
        raise UsageError(
            f"unknown family {family!r}; valid families: {', '.join(FAMILIES)}"
        )
    if circle_lengths is None:
        circle_lengths = (_TWO_PI,) if family == "pendulum_dissipative" else (1.0,)
    circle_lengths = tuple(float(L) for L in circle_lengths)
    d = len(circle_lengths)
    if family == "pendulum_dissipative" and d != 1:
        raise UsageError("pendulum_dissipative is a one-dimensional family")

    quad, p4, kappa = 1.0, 0.0, 1.0
    drift = (0.0,) * d
    if family == "pendulum_dissipative":
        drift = (float(params.get("p0", 2.0)),)
        params.setdefault("p0", 2.0)
    elif family == "discounted_mechanical":
        kappa = float(params.get("lam", 1.0))
        params.setdefault("lam", 1.0)
        if kappa <= 0:
            raise UsageError("discounted_mechanical requires lam > 0")
    elif family == "manufactured":
        params.setdefault("amplitude", 0.3)
    elif family == "custom_coefficients":
        quad = float(params.get("quad", 1.0))
        p4 = float(params.get("p4", 0.0))
        kappa = float(params.get("uc", 1.0))
        drift = tuple(float(params.get(f"drift{i + 1}", 0.0)) for i in range(d))
        if p4 < 0:
            raise UsageError("custom_coefficients requires p4 >= 0")

    if lambda_bound is None:
        lambda_bound = kappa if kappa > 0 else 1.0
    model = HamiltonianModel(
        family=family,
        params=dict(params),
        lambda_bound=float(lambda_bound),
        v_max=8.0,
        circle_lengths=circle_lengths,
        quad=quad,
        p4=p4,
        kappa=kappa,
        drift=drift,
    )
    if v_max is None:
        v_max = default_v_max(model)
    if v_max <= 0:
        raise UsageError("v_max must be positive")
    return HamiltonianModel(
        family=model.family,
        params=model.params,
        lambda_bound=model.lambda_bound,
        v_max=float(v_max),
        circle_lengths=model.circle_lengths,
        quad=model.quad,
        p4=model.p4,
        kappa=model.kappa,
        drift=model.drift,
    )


def default_v_max(model: HamiltonianModel, p_abs: float = 8.0) -> float:
    """Velocity radius default: sup of |dH/dp| over the audit box for
    quadratic families, 8.0 otherwise."""
    if model.p4 != 0.0 or model.quad <= 0.0:
        return 8.0
    reach = np.linalg.norm([p_abs + abs(b) for b in model.drift])
    return float(model.quad * reach)


def manufactured_target(model: HamiltonianModel, grid) -> "np.ndarray":
    """Nodal samples of the classical solution W of the manufactured family."""
    if model.family != "manufactured":
        raise UsageError("manufactured_target only applies to the manufactured family")
    w, _, _ = model._w_parts(grid.nodes())
    return w.reshape(grid.n)


# -- spec operation surfaces -------------------------------------------


def eval_H(model: HamiltonianModel, pt: ContactPoint) -> float:
    """H(x, u, p) for the selected family."""
    return float(model.H(np.asarray(pt.x), pt.u, np.asarray(pt.p)))


def grad_H(model: HamiltonianModel, pt: ContactPoint):
    """(dH/dx, dH/du, dH/dp) as (array, float, array)."""
    hx, hu, hp = model.gradients(np.asarray(pt.x), pt.u, np.asarray(pt.p))
    return hx, float(hu), hp


def eval_L(model: HamiltonianModel, x, u: float, v) -> float:
    """Convex conjugate of H in p at (x, u, v).

    Closed form for quadratic-in-p families; damped Newton ascent otherwise,
    with a per-axis golden-section fallback (tolerance 1e-10 on the gradient).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if model.p4 == 0.0:
        return float(model.L(x, u, v))
    value, _ = legendre_max(model, x, u, v)
    return value


def legendre_max(model: HamiltonianModel, x, u: float, v, tol: float = 1e-10):
    """Maximize <v,p> - H(x,u,p) over p; returns (value, maximizer)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))

    def g(p):
        return float(np.dot(v, p) - model.H(x, u, p))

    p = np.zeros_like(v)
    for _ in range(100):
        _, _, hp = model.gradients(x, u, p)
        resid = v - hp
        if np.linalg.norm(resid) <= tol:
            return g(p), p
        q = p - np.asarray(model.drift)
        r2 = float(np.dot(q, q))
        # Hessian of H in p: (quad + 4 p4 r^2) I + 8 p4 q q^T
        a = model.quad + 4.0 * model.p4 * r2
        hess = a * np.eye(model.d) + 8.0 * model.p4 * np.outer(q, q)
        try:
            step = np.linalg.solve(hess, resid)
        except np.linalg.LinAlgError:
            break
        t, g0 = 1.0, g(p)
        while t > 1e-12 and g(p + t * step) < g0:
            t *= 0.5
        if t <= 1e-12:
            break
        p = p + t * step
    p = _golden_per_axis(g, p, radius=4.0 * (np.linalg.norm(v) + 1.0), tol=tol)
    _, _, hp = model.gradients(x, u, p)
    if np.linalg.norm(v - hp) > 1e-6:
        raise NumericalError(
            f"Legendre transform did not converge; gradient residual {np.linalg.norm(v - hp):.3e}"
        )
    return g(p), p


def _golden_per_axis(g, p, radius: float, tol: float, sweeps: int = 6):
    """Cyclic golden-section ascent, one axis at a time."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    p = p.copy()
    for _ in range(sweeps):
        for ax in range(len(p)):
            lo, hi = p[ax] - radius, p[ax] + radius

            def val(t):
                q = p.copy()
                q[ax] = t
                return g(q)

            a, b = lo, hi
            c = b - phi * (b - a)
            dd = a + phi * (b - a)
            fc, fd = val(c), val(dd)
            while b - a > tol:
                if fc > fd:
                    b, dd, fd = dd, c, fc
                    c = b - phi * (b - a)
                    fc = val(c)
                else:
                    a, c, fc = c, dd, fd
                    dd = a + phi * (b - a)
                    fd = val(dd)
            p[ax] = 0.5 * (a + b)
    return p


# -- assumption audit -------------------------------------------------


@dataclass(frozen=True)
class SampleSpec:
    """Lattice bounds and counts for the (x, u, p) audit box."""

    x_count: int = 17
    u_count: int = 17
    p_count: int = 17
    u_abs: float = 3.0
    p_abs: float = 8.0


@dataclass(frozen=True)
class AuditReport:
    h1_min_eig: float
    h3_min: float
    h3_max: float
    h1_pass: bool
    h3_pass: bool
    worst_h1: ContactPoint
    worst_h3: ContactPoint
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.h1_pass and self.h3_pass


def audit_sample(model: HamiltonianModel, spec: SampleSpec):
    """The (x, u, p) lattice of the audit box as flat arrays."""
    axes_x = [np.linspace(0.0, L, spec.x_count, endpoint=False) for L in model.circle_lengths]
    axes_p = [np.linspace(-spec.p_abs, spec.p_abs, spec.p_count) for _ in range(model.d)]
    axis_u = np.linspace(-spec.u_abs, spec.u_abs, spec.u_count)
    mesh = np.meshgrid(*axes_x, axis_u, *axes_p, indexing="ij")
    flat = [m.ravel() for m in mesh]
    x = np.stack(flat[: model.d], axis=-1)
    u = flat[model.d]
    p = np.stack(flat[model.d + 1 :], axis=-1)
    return x, u, p


def audit_assumptions(model: HamiltonianModel, spec: SampleSpec | None = None) -> AuditReport:
    """Check (H1) positive-definite d^2H/dp^2 and (H3) 0 < dH/du <= lambda
    on a finite sample; the report carries the worst offenders."""
    spec = spec or SampleSpec()
    x, u, p = audit_sample(model, spec)
    eigs = model.hess_pp_min_eig(np.broadcast_to(p, (len(u), model.d)))
    eigs = np.broadcast_to(eigs, u.shape)
    _, hu, _ = model.gradients(x, u, p)
    i1 = int(np.argmin(eigs))
    i3 = int(np.argmin(hu))
    h1_min = float(eigs[i1])
    h3_min = float(hu.min())
    h3_max = float(hu.max())
    return AuditReport(
        h1_min_eig=h1_min,
        h3_min=h3_min,
        h3_max=h3_max,
        h1_pass=h1_min > 0.0,
        h3_pass=(h3_min > 0.0) and (h3_max <= model.lambda_bound + 1e-12),
        worst_h1=model.point(x[i1], u[i1], p[i1]),
        worst_h3=model.point(x[i3], u[i3], p[i3]),
        n_samples=len(u),
    )
