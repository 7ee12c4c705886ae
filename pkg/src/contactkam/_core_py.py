"""Pure-numpy implementations of the hot step kernels.

Mirrors the compiled extension `_core`; contracts and arithmetic expressions
are kept identical so the two backends agree to rounding.

Candidate k has departure offset encoded as an integer node shift plus a
fractional offset per axis; phi is the one-step objective

    backward: phi = fd * (1 - kappa*dt) + dt * (ke[k] - pot_dep[k, node])
    forward:  phi = fd * (1 + kappa*dt) - dt * (ke[k] - pot_dep[k, node])

with fd the multilinear interpolation of f at the departure point. The scan
reduces over candidates (min backward, max forward) taking the first
occurrence on exact ties; candidates are pre-sorted by |v| so the first
occurrence is the smallest-|v| tie-break.
"""

from __future__ import annotations

import numpy as np


class Stepper1D:
    def __init__(self, pot_dep, ke, ishift, frac, kappa, dt, forward):
        self.pot_dep = np.ascontiguousarray(pot_dep, dtype=float)
        self.ke = np.ascontiguousarray(ke, dtype=float)
        self.frac = np.ascontiguousarray(frac, dtype=float)
        self.kappa = float(kappa)
        self.dt = float(dt)
        self.forward = bool(forward)
        m, n = self.pot_dep.shape
        base = np.arange(n, dtype=np.int64)[None, :]
        self._i0 = (base + np.asarray(ishift, dtype=np.int64)[:, None]) % n
        self._i1 = (self._i0 + 1) % n
        self._ishift = np.ascontiguousarray(ishift, dtype=np.int64)
        self._n = n

    def _phi_all(self, f):
        f = np.asarray(f, dtype=float)
        w = self.frac[:, None]
        fd = (1.0 - w) * f[self._i0] + w * f[self._i1]
        if self.forward:
            return fd * (1.0 + self.kappa * self.dt) - self.dt * (
                self.ke[:, None] - self.pot_dep
            )
        return fd * (1.0 - self.kappa * self.dt) + self.dt * (
            self.ke[:, None] - self.pot_dep
        )

    def scan(self, f):
        phi = self._phi_all(f)
        bestk = np.argmax(phi, axis=0) if self.forward else np.argmin(phi, axis=0)
        best = np.take_along_axis(phi, bestk[None, :], axis=0)[0]
        return best, bestk.astype(np.int64)

    def phi_rows(self, f, krow):
        f = np.asarray(f, dtype=float)
        krow = np.asarray(krow, dtype=np.int64).ravel()
        i = np.arange(self._n, dtype=np.int64)
        i0 = (i + self._ishift[krow]) % self._n
        i1 = (i0 + 1) % self._n
        w = self.frac[krow]
        fd = (1.0 - w) * f[i0] + w * f[i1]
        pot = self.pot_dep[krow, i]
        if self.forward:
            return fd * (1.0 + self.kappa * self.dt) - self.dt * (self.ke[krow] - pot)
        return fd * (1.0 - self.kappa * self.dt) + self.dt * (self.ke[krow] - pot)


class Stepper2D:
    def __init__(self, pot_dep, ke, ishift, frac, kappa, dt, forward):
        self.pot_dep = np.ascontiguousarray(pot_dep, dtype=float)
        self.ke = np.ascontiguousarray(ke, dtype=float)
        self.frac = np.ascontiguousarray(frac, dtype=float)
        self.ishift = np.ascontiguousarray(ishift, dtype=np.int64)
        self.kappa = float(kappa)
        self.dt = float(dt)
        self.forward = bool(forward)
        self._m, self._n1, self._n2 = self.pot_dep.shape

    def _fd(self, f, k):
        s1, s2 = self.ishift[k]
        w1, w2 = self.frac[k]
        a = np.roll(f, (-int(s1), -int(s2)), axis=(0, 1))
        b = np.roll(f, (-int(s1) - 1, -int(s2)), axis=(0, 1))
        c = np.roll(f, (-int(s1), -int(s2) - 1), axis=(0, 1))
        d = np.roll(f, (-int(s1) - 1, -int(s2) - 1), axis=(0, 1))
        return (
            (1.0 - w1) * (1.0 - w2) * a
            + w1 * (1.0 - w2) * b
            + (1.0 - w1) * w2 * c
            + w1 * w2 * d
        )

    def _phi_k(self, f, k):
        fd = self._fd(f, k)
        if self.forward:
            return fd * (1.0 + self.kappa * self.dt) - self.dt * (
                self.ke[k] - self.pot_dep[k]
            )
        return fd * (1.0 - self.kappa * self.dt) + self.dt * (
            self.ke[k] - self.pot_dep[k]
        )

    def scan(self, f):
        f = np.asarray(f, dtype=float)
        best = self._phi_k(f, 0)
        bestk = np.zeros(f.shape, dtype=np.int64)
        for k in range(1, self._m):
            phi = self._phi_k(f, k)
            upd = phi > best if self.forward else phi < best
            best = np.where(upd, phi, best)
            bestk[upd] = k
        return best, bestk

    def phi_rows(self, f, krow):
        f = np.asarray(f, dtype=float)
        krow = np.asarray(krow, dtype=np.int64)
        out = np.empty(f.shape)
        for k in np.unique(krow):
            mask = krow == k
            out[mask] = self._phi_k(f, int(k))[mask]
        return out


def interp_at_1d(f, q):
    """Periodic linear interpolation; q is the position in grid units."""
    f = np.asarray(f, dtype=float)
    q = np.asarray(q, dtype=float)
    n = f.shape[0]
    qf = np.floor(q)
    w = q - qf
    i0 = qf.astype(np.int64) % n
    i1 = (i0 + 1) % n
    return (1.0 - w) * f[i0] + w * f[i1]


def interp_at_2d(f, q):
    """Periodic bilinear interpolation; q has shape (m, 2) in grid units."""
    f = np.asarray(f, dtype=float)
    q = np.asarray(q, dtype=float)
    n1, n2 = f.shape
    qf = np.floor(q)
    w = q - qf
    a0 = qf[:, 0].astype(np.int64) % n1
    b0 = qf[:, 1].astype(np.int64) % n2
    a1 = (a0 + 1) % n1
    b1 = (b0 + 1) % n2
    w1 = w[:, 0]
    w2 = w[:, 1]
    return (
        (1.0 - w1) * (1.0 - w2) * f[a0, b0]
        + w1 * (1.0 - w2) * f[a1, b0]
        + (1.0 - w1) * w2 * f[a0, b1]
        + w1 * w2 * f[a1, b1]
    )
