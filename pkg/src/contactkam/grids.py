"""Periodic grids on flat tori T^d (d = 1 or 2) and scalar fields on them.

Fields use node-centered uniform grids; interpolation is multilinear with
periodic wraparound, which keeps the interpolation operator monotone in the
nodal values (raising a node never lowers any interpolated value).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

# Fractional node offsets below this snap to the node, so interpolation is
# exact at node coordinates despite x/h rounding.
_NODE_SNAP = 1e-12


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid: n[i] nodes on a circle of circumference lengths[i]."""

    n: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if len(self.n) not in (1, 2):
            raise UsageError(f"grid dimension must be 1 or 2, got {len(self.n)}")
        if len(self.lengths) != len(self.n):
            raise UsageError("grid.n and grid.lengths must have the same dimension")
        if any(ni < 8 for ni in self.n):
            raise UsageError(f"need at least 8 nodes per axis, got {self.n}")
        if any(L <= 0 for L in self.lengths):
            raise UsageError(f"circle lengths must be positive, got {self.lengths}")

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / ni for L, ni in zip(self.lengths, self.n))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.n))

    def axis(self, i: int) -> np.ndarray:
        return np.arange(self.n[i]) * self.spacing[i]

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (num_nodes, d), C-order over axes."""
        if self.d == 1:
            return self.axis(0)[:, None]
        X, Y = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce coordinates to the fundamental domain [0, L) per axis."""
        x = np.asarray(x, dtype=float)
        return np.mod(x, np.asarray(self.lengths))

    def shortest_disp(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Per-axis displacement from a to b reduced to (-L/2, L/2].

        Ties at the cut locus break toward the positive axis direction.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        L = np.asarray(self.lengths)
        disp = np.mod(b - a, L)
        return np.where(disp > L / 2, disp - L, disp)

    def torus_dist(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        disp = self.shortest_disp(a, b)
        return np.sqrt(np.sum(disp * disp, axis=-1))

    def __eq__(self, other):
        return (
            isinstance(other, PeriodicGrid)
            and self.n == other.n
            and self.lengths == other.lengths
        )

    def __hash__(self):
        return hash((self.n, self.lengths))


@dataclass(frozen=True)
class GridField:
    """Scalar field given by one real value per grid node."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != tuple(self.grid.n):
            raise UsageError(
                f"field shape {vals.shape} does not match grid shape {tuple(self.grid.n)}"
            )
        if not np.all(np.isfinite(vals)):
            raise UsageError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.grid, values)


def constant_field(grid: PeriodicGrid, c: float) -> GridField:
    return GridField(grid, np.full(grid.n, float(c)))


def field_from_function(grid: PeriodicGrid, fn) -> GridField:
    """Sample fn at the nodes; fn takes an (num_nodes, d) array, returns (num_nodes,)."""
    vals = np.asarray(fn(grid.nodes()), dtype=float).reshape(grid.n)
    return GridField(grid, vals)


def _fractional_index(grid: PeriodicGrid, x: np.ndarray):
    """Split positions into integer node index and fractional offset per axis."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = np.asarray(grid.n)
    h = np.asarray(grid.spacing)
    q = np.mod(x, np.asarray(grid.lengths)) / h
    i0 = np.floor(q).astype(np.int64)
    w = q - i0
    snap_hi = w > 1.0 - _NODE_SNAP
    i0 = np.where(snap_hi, i0 + 1, i0)
    w = np.where(snap_hi | (w < _NODE_SNAP), 0.0, w)
    i0 = np.mod(i0, n)
    return i0, w


def interpolate(f: GridField, x: np.ndarray):
    """Multilinear periodic interpolation of f at x.

    x may be a single point (shape (d,)) or a batch (m, d); scalar x is
    accepted for d = 1. Exact at nodes; values stay within [min f, max f].
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0 or x.shape == (f.grid.d,)
    if x.ndim == 0:
        x = x[None]
    i0, w = _fractional_index(f.grid, x)
    v = f.values
    if f.grid.d == 1:
        a = i0[:, 0]
        b = (a + 1) % f.grid.n[0]
        out = (1.0 - w[:, 0]) * v[a] + w[:, 0] * v[b]
    else:
        a0 = i0[:, 0]
        a1 = (a0 + 1) % f.grid.n[0]
        b0 = i0[:, 1]
        b1 = (b0 + 1) % f.grid.n[1]
        wx = w[:, 0]
        wy = w[:, 1]
        out = (
            (1.0 - wx) * (1.0 - wy) * v[a0, b0]
            + wx * (1.0 - wy) * v[a1, b0]
            + (1.0 - wx) * wy * v[a0, b1]
            + wx * wy * v[a1, b1]
        )
    return float(out[0]) if scalar else out


def gradient(f: GridField, index, mode: str = "central") -> np.ndarray:
    """Finite-difference gradient covector at one node, periodic wraparound.

    mode is one of {central, left, right}; central is exact for data that is
    linear across the stencil.
    """
    if mode not in ("central", "left", "right"):
        raise UsageError(f"unknown gradient mode {mode!r}")
    idx = (int(index),) if np.isscalar(index) else tuple(int(i) for i in index)
    if len(idx) != f.grid.d:
        raise UsageError("node index dimension does not match the grid")
    v = f.values
    out = np.empty(f.grid.d)
    for ax in range(f.grid.d):
        n = f.grid.n[ax]
        h = f.grid.spacing[ax]
        if not 0 <= idx[ax] < n:
            raise UsageError(f"node index {idx} outside grid {f.grid.n}")
        lo = list(idx)
        hi = list(idx)
        lo[ax] = (idx[ax] - 1) % n
        hi[ax] = (idx[ax] + 1) % n
        if mode == "central":
            out[ax] = (v[tuple(hi)] - v[tuple(lo)]) / (2.0 * h)
        elif mode == "left":
            out[ax] = (v[tuple(idx)] - v[tuple(lo)]) / h
        else:
            out[ax] = (v[tuple(hi)] - v[tuple(idx)]) / h
    return out


def gradient_field(f: GridField, mode: str = "central") -> np.ndarray:
    """Gradient at every node, shape grid.n + (d,). Same stencils as gradient()."""
    if mode not in ("central", "left", "right"):
        raise UsageError(f"unknown gradient mode {mode!r}")
    v = f.values
    out = np.empty(v.shape + (f.grid.d,))
    for ax in range(f.grid.d):
        h = f.grid.spacing[ax]
        if mode == "central":
            out[..., ax] = (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2.0 * h)
        elif mode == "left":
            out[..., ax] = (v - np.roll(v, 1, axis=ax)) / h
        else:
            out[..., ax] = (np.roll(v, -1, axis=ax) - v) / h
    return out


def sup_distance(f: GridField, g: GridField) -> float:
    """Sup norm of f - g over the nodes; both fields must share the grid."""
    if f.grid != g.grid:
        raise UsageError("sup_distance requires fields on the same grid")
    return float(np.max(np.abs(f.values - g.values)))


def write_field_csv(f: GridField, path) -> None:
    """One row per node: x1[,x2],value with 17 significant digits."""
    cols = [f"x{i + 1}" for i in range(f.grid.d)] + ["value"]
    nodes = f.grid.nodes()
    vals = f.values.ravel()
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row, val in zip(nodes, vals):
            fh.write(",".join(f"{c:.17g}" for c in row) + f",{val:.17g}\n")


def read_field_csv(grid: PeriodicGrid, path) -> GridField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != grid.num_nodes or data.shape[1] != grid.d + 1:
        raise UsageError(f"CSV shape {data.shape} does not match grid {grid.n}")
    return GridField(grid, data[:, -1].reshape(grid.n))
