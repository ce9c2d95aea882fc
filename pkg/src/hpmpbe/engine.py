"""Numeric homotopy-perturbation series on a size grid.

With a time-independent starting term every correction factorises as
``u_k(t, m) = t**k v_k(m)``.  Integrating the order-k equation in time from
``u_k(0, m) = 0`` gives

    fragmentation:  v_k = [-a v_{k-1} + int_m k(m|n) a(n) v_{k-1}(n) dn] / k
    aggregation:    v_k = [1/2 sum_{i+j=k-1} int_0^m g(m-n, n) v_i(m-n) v_j(n) dn
                           - sum_{i+j=k-1} v_i(m) int_0 g(m, n) v_j(n) dn] / k

Only the factors ``v_k`` are stored.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import quadrature as quad
from .core import (
    AggregationKernel,
    BreakageKernel,
    DistributionField,
    Grid,
    GridError,
    HPMError,
    Scenario,
    SeriesTerm,
    require_aggregation,
    require_breakage,
)

logger = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    """Requested times lie outside the estimated convergence region of the series."""


# ---------------------------------------------------------------------------
# fragmentation


def _birth_dense(kernel: BreakageKernel, grid: Grid, values: np.ndarray, breaks) -> np.ndarray:
    m = grid.points
    idx, w = grid.rule(breaks)
    n = len(m)
    out = np.zeros(n)
    av = kernel.rate(m) * values
    for start in range(0, n, 256):
        rows = np.arange(start, min(n, start + 256))
        with np.errstate(all="ignore"):
            y = kernel.distribution(m[rows, None], m[None, :]) * av[None, :]
        y[~np.isfinite(y)] = 0.0
        parts = np.einsum("js,rjs->rj", w, y[:, idx])
        mask = np.arange(n - 1)[None, :] >= rows[:, None]
        out[rows] = np.sum(np.where(mask, parts, 0.0), axis=1)
    return out


def frag_next_term(kernel: BreakageKernel, v_prev: DistributionField, k: int, grid: Grid | None = None) -> DistributionField:
    """Spatial factor of order ``k`` from that of order ``k - 1``."""
    require_breakage(kernel)
    if k < 1:
        raise ValueError("k must be >= 1")
    grid = v_prev.grid if grid is None else grid
    if grid is not v_prev.grid:
        raise GridError("field and grid disagree")
    m = grid.points
    breaks = v_prev.break_indices
    v = v_prev.regular

    out = -kernel.rate(m) * v
    if kernel.birth_factors:
        for f, h in kernel.birth_factors:
            out = out + f(m) * grid.tail_integrals(h(m) * v, breaks)
    else:
        out = out + _birth_dense(kernel, grid, v, breaks)

    atoms = []
    for loc, wt in v_prev.atoms:
        a_loc = float(kernel.rate(np.array(loc)))
        atoms.append((loc, -a_loc * wt / k))
        below = m <= loc
        with np.errstate(all="ignore"):
            src = kernel.distribution(m[below], loc) * a_loc * wt
        out[below] += np.where(np.isfinite(src), src, 0.0)
    return DistributionField(grid, out / k, tuple(atoms), v_prev.breaks)


# ---------------------------------------------------------------------------
# aggregation


def _with_origin(grid: Grid, values: np.ndarray) -> np.ndarray:
    return np.concatenate(([quad.extrapolate_origin(grid.points, values)], values))


def _require_aligned(grid: Grid) -> float:
    if not grid.aligned:
        raise GridError("aggregation needs an origin-aligned uniform grid (points[i] == (i + 1) h)")
    return grid.spacing


class _AggCache:
    """Per-order origin-extended arrays ``phi_r v_i`` and ``psi_r v_i`` plus their totals."""

    def __init__(self, kernel: AggregationKernel, grid: Grid):
        self.kernel = kernel
        self.grid = grid
        self.h = _require_aligned(grid)
        self.weights = self.h * quad.uniform_weights(len(grid) + 1)
        self.left: list[list[np.ndarray]] = []
        self.right: list[list[np.ndarray]] = []
        self.totals: list[list[float]] = []
        self.raw: list[np.ndarray] = []

    def push(self, v: DistributionField):
        if v.atoms:
            raise HPMError("aggregation series cannot carry atoms (monodisperse aggregation is unsupported)")
        m = self.grid.points
        self.raw.append(_with_origin(self.grid, v.regular))
        lefts, rights, tots = [], [], []
        for phi, psi in self.kernel.factors:
            lefts.append(_with_origin(self.grid, phi(m) * v.regular))
            r = _with_origin(self.grid, psi(m) * v.regular)
            rights.append(r)
            tots.append(float(self.weights @ r))
        self.left.append(lefts)
        self.right.append(rights)
        self.totals.append(tots)

    def birth_pair(self, i: int, j: int) -> np.ndarray:
        acc = np.zeros(len(self.grid) + 1)
        for r in range(len(self.kernel.factors)):
            acc += quad.uniform_convolution(self.left[i][r], self.right[j][r], self.h)
        return 0.5 * acc[1:]

    def death_pair(self, i: int, j: int) -> np.ndarray:
        m = self.grid.points
        acc = np.zeros(len(self.grid))
        for r, (phi, _) in enumerate(self.kernel.factors):
            acc += phi(m) * self.totals[j][r]
        return self.raw[i][1:] * acc


def _dense_pair(kernel: AggregationKernel, grid: Grid, vi: np.ndarray, vj: np.ndarray) -> np.ndarray:
    h = _require_aligned(grid)
    nodes = np.concatenate(([0.0], grid.points))
    fi, fj = _with_origin(grid, vi), _with_origin(grid, vj)
    n = len(grid)
    birth = np.zeros(n)
    for p in range(1, n + 1):
        q = np.arange(p + 1)
        integrand = kernel.rate(nodes[p] - nodes[q], nodes[q]) * fi[p - q] * fj[q]
        birth[p - 1] = h * np.sum(quad.uniform_weights(p + 1) * integrand)
    w = h * quad.uniform_weights(n + 1)
    g = kernel.rate(grid.points[:, None], nodes[None, :])
    death = vi * (g @ (w * fj))
    return 0.5 * birth - death


def agg_next_term(kernel: AggregationKernel, v_all: Sequence[DistributionField], k: int, grid: Grid | None = None,
                  _cache: _AggCache | None = None) -> DistributionField:
    """Spatial factor of order ``k`` from the factors of orders ``0..k-1``.

    Pairs ``(i, j)`` with ``i + j = k - 1`` contribute, each ordered pair once.
    """
    require_aggregation(kernel)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(v_all) < k:
        raise ValueError(f"need factors of orders 0..{k - 1}")
    grid = v_all[0].grid if grid is None else grid
    _require_aligned(grid)
    if any(v.atoms for v in v_all[:k]):
        raise HPMError("aggregation series cannot carry atoms (monodisperse aggregation is unsupported)")

    out = np.zeros(len(grid))
    if kernel.factors:
        cache = _cache
        if cache is None:
            cache = _AggCache(kernel, grid)
            for v in v_all[:k]:
                cache.push(v)
        for i in range(k):
            j = k - 1 - i
            out += cache.birth_pair(i, j) - cache.death_pair(i, j)
    else:
        for i in range(k):
            out += _dense_pair(kernel, grid, v_all[i].regular, v_all[k - 1 - i].regular)
    return DistributionField(grid, out / k)


# ---------------------------------------------------------------------------
# series


@dataclass
class SeriesState:
    scenario: Scenario
    terms: list[SeriesTerm]
    first_moments: list[float] = field(default_factory=list)
    term_norms: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.terms) - 1


def _convergence_warnings(scenario: Scenario, v0: DistributionField) -> list[str]:
    kern = scenario.kernel
    if getattr(kern, "name", None) != "constant" or not scenario.times:
        return []
    # ratio of successive terms ~ t M0 / 2 for the constant kernel
    radius = 2.0 / v0.moment(0)
    late = [t for t in scenario.times if t >= radius]
    if late:
        return [f"times {late} outside the convergence region t < {radius:.6g} of the constant-kernel series"]
    return []


def build_series(scenario: Scenario) -> SeriesState:
    """Compute the spatial factors of orders ``0..scenario.order``."""
    kern, grid = scenario.kernel, scenario.grid
    v0 = scenario.ic.sample(grid)
    terms = [SeriesTerm(0, v0)]
    if kern.kind == "aggregation":
        if v0.atoms:
            raise HPMError("monodisperse initial conditions are not supported for aggregation")
        cache = _AggCache(kern, grid) if kern.factors else None
        if cache is not None:
            cache.push(v0)
        fields = [v0]
        for k in range(1, scenario.order + 1):
            vk = agg_next_term(kern, fields, k, grid, _cache=cache)
            fields.append(vk)
            if cache is not None:
                cache.push(vk)
            terms.append(SeriesTerm(k, vk))
    else:
        require_breakage(kern)
        prev = v0
        for k in range(1, scenario.order + 1):
            prev = frag_next_term(kern, prev, k, grid)
            terms.append(SeriesTerm(k, prev))

    state = SeriesState(scenario, terms)
    for term in terms:
        state.first_moments.append(term.spatial.moment(1))
        state.term_norms.append(float(np.max(np.abs(term.spatial.regular), initial=0.0))
                                + sum(abs(w) for _, w in term.spatial.atoms))
    for msg in _convergence_warnings(scenario, v0):
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
        state.warnings.append(msg)
    logger.debug("built %d terms on %r", len(terms), grid)
    return state


def evaluate_series(state: SeriesState, t: float, truncation: int | None = None) -> DistributionField:
    """Partial sum ``sum_{k <= truncation} t**k v_k``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    n = state.order if truncation is None else int(truncation)
    if not 0 <= n <= state.order:
        raise ValueError(f"truncation {n} exceeds built order {state.order}")
    total = state.terms[0].spatial
    for term in state.terms[1:n + 1]:
        total = total + term.at(t)
    return total


def term_sequence_norms(state: SeriesState, t: float) -> list[float]:
    """``max |u_k(t, .)|`` per order, for judging convergence by eye."""
    return [norm * t**k for k, norm in enumerate(state.term_norms)]


def gel_time_estimate(kernel, v0: DistributionField) -> float:
    """``1 / M2(0)`` for the product kernel, infinity otherwise."""
    if getattr(kernel, "name", None) == "product":
        return 1.0 / v0.moment(2)
    return math.inf
