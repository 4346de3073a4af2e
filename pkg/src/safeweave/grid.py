"""Dense rectangular N-dimensional grids with multilinear interpolation and
central-difference gradients. Shared by the offline reachability solver and
the runtime value cache.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GridSpec", "GridField", "interp", "interp_stack", "gradient", "node_iter"]


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid.

    Non-periodic dimensions place nodes on [lo, hi] inclusive with spacing
    (hi - lo) / (n - 1). Periodic dimensions identify hi with lo and use
    spacing (hi - lo) / n, so the node at hi is not stored.
    """

    lo: tuple
    hi: tuple
    shape: tuple
    periodic: tuple = None

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        shape = tuple(int(n) for n in self.shape)
        periodic = self.periodic
        if periodic is None:
            periodic = (False,) * len(shape)
        periodic = tuple(bool(p) for p in periodic)
        if not (len(lo) == len(hi) == len(shape) == len(periodic)):
            raise ValueError("per-dimension field lengths differ")
        for a, b, n in zip(lo, hi, shape):
            if b <= a:
                raise ValueError("upper bound must exceed lower bound")
            if n < 2:
                raise ValueError("need at least 2 nodes per dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "periodic", periodic)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple:
        return tuple(
            (b - a) / (n if p else n - 1)
            for a, b, n, p in zip(self.lo, self.hi, self.shape, self.periodic)
        )

    def axis(self, d: int) -> np.ndarray:
        return self.lo[d] + self.spacing[d] * np.arange(self.shape[d])

    def axes(self) -> list:
        return [self.axis(d) for d in range(self.ndim)]

    def coords(self, index) -> np.ndarray:
        h = self.spacing
        return np.array([self.lo[d] + h[d] * index[d] for d in range(self.ndim)])


@dataclass
class GridField:
    """Values sampled at every node of a grid, row-major."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.shape:
            if v.size != self.spec.num_nodes:
                raise ValueError("value count does not match grid")
            v = v.reshape(self.spec.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        self.values = v


def node_iter(spec: GridSpec):
    """Yield (multi-index, coordinates) over all nodes in row-major order."""
    h = spec.spacing
    for idx in np.ndindex(*spec.shape):
        yield idx, np.array([spec.lo[d] + h[d] * idx[d] for d in range(spec.ndim)])


def _locate(spec: GridSpec, x: np.ndarray):
    """Stencil base indices, fractions, and extrapolation flags for queries.

    x has shape (m, ndim). Out-of-domain coordinates on non-periodic
    dimensions are clamped to the boundary and flagged.
    """
    m = x.shape[0]
    i0 = np.empty((m, spec.ndim), dtype=np.intp)
    frac = np.empty((m, spec.ndim))
    wrap = np.zeros((m, spec.ndim), dtype=bool)
    extrapolated = np.zeros(m, dtype=bool)
    h = spec.spacing
    for d in range(spec.ndim):
        t = (x[:, d] - spec.lo[d]) / h[d]
        n = spec.shape[d]
        if spec.periodic[d]:
            t = np.mod(t, n)
            base = np.floor(t).astype(np.intp)
            base = np.minimum(base, n - 1)
            i0[:, d] = base
            frac[:, d] = t - base
            wrap[:, d] = True
        else:
            out = (t < 0.0) | (t > n - 1)
            extrapolated |= out
            t = np.clip(t, 0.0, float(n - 1))
            base = np.minimum(np.floor(t).astype(np.intp), n - 2)
            i0[:, d] = base
            frac[:, d] = t - base
    return i0, frac, wrap, extrapolated


def _stencil(spec: GridSpec, i0, frac):
    """Flat indices (m, 2^N) and weights (m, 2^N) of the multilinear
    stencil, built by per-dimension outer products."""
    m = i0.shape[0]
    strides = [int(np.prod(spec.shape[d + 1 :], dtype=np.int64)) for d in range(spec.ndim)]
    idx = np.zeros((m, 1), dtype=np.intp)
    w = np.ones((m, 1))
    for d in range(spec.ndim):
        lo = i0[:, d]
        hi = lo + 1
        if spec.periodic[d]:
            hi = np.mod(hi, spec.shape[d])
        pair_idx = np.stack([lo, hi], axis=1) * strides[d]  # (m, 2)
        f = frac[:, d]
        pair_w = np.stack([1.0 - f, f], axis=1)
        idx = (idx[:, :, None] + pair_idx[:, None, :]).reshape(m, -1)
        w = (w[:, :, None] * pair_w[:, None, :]).reshape(m, -1)
    return idx, w


def interp(f: GridField, x):
    """Multilinear interpolation of a field at one point or a batch.

    Returns (values, extrapolated). Out-of-domain queries on non-periodic
    dimensions are clamped to the boundary and flagged; periodic dimensions
    wrap. Scalars in, scalars out.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    scalar = np.asarray(x).ndim == 1
    if pts.shape[1] != f.spec.ndim:
        raise ValueError("query dimension mismatch")
    i0, frac, wrap, extrapolated = _locate(f.spec, pts)
    idx, w = _stencil(f.spec, i0, frac)
    vals = np.einsum("mc,mc->m", f.values.reshape(-1)[idx], w)
    if scalar:
        return float(vals[0]), bool(extrapolated[0])
    return vals, extrapolated


def interp_stack(fields, x):
    """Interpolate several fields on the same grid at one point, sharing the
    stencil. Returns (values array, extrapolated flag)."""
    spec = fields[0].spec
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    i0, frac, wrap, extrapolated = _locate(spec, pts)
    idx, w = _stencil(spec, i0, frac)
    vals = np.array([float(f.values.reshape(-1)[idx[0]] @ w[0]) for f in fields])
    return vals, bool(extrapolated[0])


def gradient(f: GridField):
    """Per-dimension derivative fields.

    Central differences in the interior, second-order one-sided stencils at
    non-periodic boundaries, wrapped central differences on periodic
    dimensions. Requires at least 3 nodes on non-periodic dimensions.
    """
    spec = f.spec
    out = []
    v = f.values
    for d in range(spec.ndim):
        h = spec.spacing[d]
        if spec.periodic[d]:
            g = (np.roll(v, -1, axis=d) - np.roll(v, 1, axis=d)) / (2.0 * h)
        else:
            if spec.shape[d] < 3:
                raise ValueError("need >= 3 nodes per non-periodic dimension")
            g = np.empty_like(v)
            sl = [slice(None)] * spec.ndim

            def at(i):
                s = sl.copy()
                s[d] = i
                return tuple(s)

            g[at(slice(1, -1))] = (v[at(slice(2, None))] - v[at(slice(None, -2))]) / (2.0 * h)
            g[at(0)] = (-3.0 * v[at(0)] + 4.0 * v[at(1)] - v[at(2)]) / (2.0 * h)
            g[at(-1)] = (3.0 * v[at(-1)] - 4.0 * v[at(-2)] + v[at(-3)]) / (2.0 * h)
        out.append(GridField(spec, g))
    return out
