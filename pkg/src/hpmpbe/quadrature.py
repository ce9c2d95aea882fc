"""Quadrature rules on size grids.

Every interval ``[x_j, x_{j+1}]`` is integrated with the cubic interpolant
through the four nearest nodes of its segment, evaluated by two-point
Gauss-Legendre (exact for cubics, so fourth order on any grid).  Segments
are separated by *breaks*: node indices where the regular part of a field
may jump.  The break node carries the left limit; the interval to its right
is integrated by extrapolation from the right-hand segment only.

On origin-aligned uniform grids (``x_i = (i + 1) h``) the convolution
integrals of the aggregation equation use :func:`uniform_weights`, the
end-corrected extended Simpson rule.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _segments(n: int, breaks: Sequence[int]) -> list[tuple[int, int]]:
    bounds = []
    lo = 0
    for b in sorted(set(int(b) for b in breaks)):
        if 0 <= b < n - 1:
            bounds.append((lo, b))
            lo = b + 1
    bounds.append((lo, n - 1))
    return bounds


def _lagrange_at(nodes: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Lagrange basis values.  ``nodes`` is (M, p), ``z`` is (M,)."""
    p = nodes.shape[1]
    out = np.ones_like(nodes)
    for i in range(p):
        for j in range(p):
            if i != j:
                out[:, i] *= (z - nodes[:, j]) / (nodes[:, i] - nodes[:, j])
    return out


def interval_rule(x: np.ndarray, breaks: Sequence[int] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Stencil indices and weights for every interval of ``x``.

    Returns ``(idx, w)`` of shape ``(n - 1, 4)``; the integral over interval
    ``j`` is ``sum(w[j] * y[idx[j]])``.  Short segments use fewer nodes; the
    unused slots carry weight zero.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    idx = np.zeros((n - 1, 4), dtype=np.intp)
    w = np.zeros((n - 1, 4))
    if n < 2:
        return idx, w
    seg_of = np.empty(n, dtype=np.intp)
    segs = _segments(n, breaks)
    for s, (lo, hi) in enumerate(segs):
        seg_of[lo:hi + 1] = s
    j = np.arange(n - 1)
    lo = np.array([segs[s][0] for s in seg_of[j + 1]])
    hi = np.array([segs[s][1] for s in seg_of[j + 1]])
    p = np.minimum(4, hi - lo + 1)
    for npts in np.unique(p):
        sel = np.nonzero(p == npts)[0]
        start = np.clip(j[sel] - 1, lo[sel], hi[sel] - npts + 1)
        cols = start[:, None] + np.arange(npts)[None, :]
        nodes = x[cols]
        a, b = x[sel], x[sel + 1]
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        ww = np.zeros((sel.size, npts))
        for g in _GAUSS:
            ww += half[:, None] * _lagrange_at(nodes, mid + half * g)
        idx[sel, :npts] = cols
        idx[sel, npts:] = cols[:, :1]
        w[sel, :npts] = ww
    return idx, w


def node_weights(x: np.ndarray, breaks: Sequence[int] = ()) -> np.ndarray:
    """Weights for the integral over ``[x[0], x[-1]]``."""
    idx, w = interval_rule(x, breaks)
    out = np.zeros(len(x))
    np.add.at(out, idx.ravel(), w.ravel())
    return out


def interval_integrals(x, y, breaks: Sequence[int] = (), rule=None) -> np.ndarray:
    idx, w = rule if rule is not None else interval_rule(x, breaks)
    y = np.asarray(y)
    return np.einsum("ij,ij...->i...", w, y[idx])


def tail_integrals(x, y, breaks: Sequence[int] = (), rule=None) -> np.ndarray:
    """``T[i] = integral of y from x[i] to x[-1]``."""
    parts = interval_integrals(x, y, breaks, rule)
    out = np.zeros((len(x),) + parts.shape[1:])
    out[:-1] = np.cumsum(parts[::-1], axis=0)[::-1]
    return out


def extrapolate_origin(x, y, npts: int = 5) -> float:
    """Value at 0 of the polynomial through the first ``npts`` nodes."""
    xs = np.asarray(x[:npts], dtype=float)
    ys = np.asarray(y[:npts], dtype=float)
    basis = _lagrange_at(xs[None, :], np.zeros(1))[0]
    return float(basis @ ys)


def origin_integral(x, y, npts: int = 4) -> float:
    """Integral over ``[0, x[0]]`` of the polynomial through the first nodes.

    Valid only when the integrand stays bounded and smooth down to 0.
    """
    xs = np.asarray(x[:npts], dtype=float)
    ys = np.asarray(y[:npts], dtype=float)
    half = 0.5 * xs[0]
    z = half + half * _GAUSS
    basis = _lagrange_at(np.repeat(xs[None, :], z.size, axis=0), z)
    return float(half * np.sum(basis @ ys))


def uniform_weights(npts: int) -> np.ndarray:
    """Unit-spacing weights for ``npts`` equally spaced nodes, fourth order.

    Seven or more nodes use ``3/8, 7/6, 23/24, 1, ..., 1, 23/24, 7/6, 3/8``.
    """
    if npts < 2:
        return np.zeros(max(npts, 0))
    if npts >= 7:
        w = np.ones(npts)
        w[:3] = w[-3:][::-1] = (3 / 8, 7 / 6, 23 / 24)
        return w
    table = {
        2: [0.5, 0.5],
        3: [1 / 3, 4 / 3, 1 / 3],
        4: [3 / 8, 9 / 8, 9 / 8, 3 / 8],
        5: [14 / 45, 64 / 45, 24 / 45, 64 / 45, 14 / 45],
        # Simpson on the first two intervals, 3/8 rule on the last three
        6: [1 / 3, 4 / 3, 1 / 3 + 3 / 8, 9 / 8, 9 / 8, 3 / 8],
    }
    return np.array(table[npts])


def uniform_convolution(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """``out[i] = integral_0^{i h} f(i h - s) g(s) ds`` on nodes ``0..N``.

    ``f`` and ``g`` hold values at ``0, h, 2h, ...`` (node 0 included).
    """
    n = len(f)
    full = np.convolve(f, g)[:n]
    out = full.copy()
    i = np.arange(n)
    big = i >= 6
    ib = i[big]
    for pos, wv in enumerate((3 / 8, 7 / 6, 23 / 24)):
        out[big] += (wv - 1.0) * (f[ib - pos] * g[pos] + f[pos] * g[ib - pos])
    out[0] = 0.0
    for k in range(1, min(6, n)):
        w = uniform_weights(k + 1)
        out[k] = np.sum(w * f[k::-1] * g[: k + 1])
    return h * out
