"""Domain types: size grids, distribution fields, kernels, initial conditions.

Sizes are dimensionless masses (scaled by the initial mean).  A
:class:`DistributionField` is a sampled regular density plus a list of Dirac
atoms; atoms are never smeared onto the grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy import integrate

from . import quadrature as quad

MAX_ORDER = 64


class HPMError(Exception):
    """Base class for errors raised by this package."""


class KernelKindError(HPMError, TypeError):
    """A breakage kernel was given where an aggregation kernel is needed, or vice versa."""


class UnsupportedOrderError(HPMError, ValueError):
    pass


class DomainError(HPMError, ValueError):
    pass


class GridError(HPMError, ValueError):
    pass


# ---------------------------------------------------------------------------
# grids


class Grid:
    """Ascending positive size samples with quadrature weights on ``[m_1, m_max]``."""

    def __init__(self, points, kind: str = "custom"):
        pts = np.array(points, dtype=float)
        if pts.ndim != 1 or pts.size < 8:
            raise GridError("a grid needs at least 8 points")
        if not np.all(np.isfinite(pts)) or pts[0] <= 0 or np.any(np.diff(pts) <= 0):
            raise GridError("grid points must be positive and strictly increasing")
        pts.flags.writeable = False
        self.points = pts
        self.kind = kind
        w = quad.node_weights(pts)
        w.flags.writeable = False
        self.weights = w
        self._rules: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return self.points.size

    def __repr__(self) -> str:
        return f"Grid(kind={self.kind!r}, n={len(self)}, m=[{self.points[0]:g}, {self.m_max:g}])"

    @property
    def m_min(self) -> float:
        return float(self.points[0])

    @property
    def m_max(self) -> float:
        return float(self.points[-1])

    @property
    def spacing(self) -> float | None:
        """Uniform spacing, or None for non-uniform grids."""
        d = np.diff(self.points)
        if np.allclose(d, d[0], rtol=1e-9, atol=0):
            return float((self.points[-1] - self.points[0]) / (len(self) - 1))
        return None

    @property
    def aligned(self) -> bool:
        """True when ``points[i] == (i + 1) * h``: uniform and anchored at the origin."""
        h = self.spacing
        return h is not None and abs(self.points[0] - h) <= 1e-9 * h

    def rule(self, breaks: Sequence[int] = ()):
        key = tuple(sorted(set(int(b) for b in breaks)))
        if key not in self._rules:
            self._rules[key] = quad.interval_rule(self.points, key)
        return self._rules[key]

    def index_of(self, location: float, rtol: float = 1e-9) -> int:
        """Index of the grid point equal to ``location``; raises if absent."""
        i = int(np.argmin(np.abs(self.points - location)))
        if abs(self.points[i] - location) > rtol * max(abs(location), 1.0):
            raise GridError(f"size {location:g} is not a grid point")
        return i

    def integrate(self, values, breaks: Sequence[int] = (), from_origin: bool = False) -> float:
        values = np.asarray(values, dtype=float)
        if breaks:
            total = float(np.sum(quad.interval_integrals(self.points, values, rule=self.rule(breaks))))
        else:
            total = float(self.weights @ values)
        if from_origin:
            total += quad.origin_integral(self.points, values)
        return total

    def tail_integrals(self, values, breaks: Sequence[int] = ()) -> np.ndarray:
        return quad.tail_integrals(self.points, values, rule=self.rule(breaks))


def make_grid(kind: str, m_min: float, m_max: float, count: int) -> Grid:
    """Linear or geometric grid of ``count`` points on ``[m_min, m_max]``.

    A linear grid whose ``m_min`` equals its spacing, i.e.
    ``make_grid("linear", L / N, L, N)``, is origin-aligned and is what the
    aggregation solvers require.
    """
    if not (0 < m_min < m_max) or not np.isfinite(m_max):
        raise GridError(f"need 0 < m_min < m_max, got {m_min!r}, {m_max!r}")
    if int(count) != count or count < 8:
        raise GridError(f"count must be an integer >= 8, got {count!r}")
    if kind == "linear":
        pts = np.linspace(m_min, m_max, int(count))
    elif kind == "geometric":
        pts = np.geomspace(m_min, m_max, int(count))
    else:
        raise GridError(f"unknown grid kind {kind!r} (expected 'linear' or 'geometric')")
    return Grid(pts, kind=kind)


def aligned_grid(m_max: float, count: int) -> Grid:
    return make_grid("linear", m_max / count, m_max, count)


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class DistributionField:
    """Regular density on a grid plus Dirac atoms ``(location, weight)``.

    ``breaks`` lists sizes where the regular part may jump (they must be
    grid points); by default these are the atom locations.
    """

    grid: Grid
    regular: np.ndarray
    atoms: tuple[tuple[float, float], ...] = ()
    breaks: tuple[float, ...] | None = None

    def __post_init__(self):
        reg = np.array(self.regular, dtype=float)
        if reg.shape != self.grid.points.shape:
            raise ValueError("regular part does not match the grid")
        reg.flags.writeable = False
        object.__setattr__(self, "regular", reg)
        atoms = tuple((float(loc), float(w)) for loc, w in self.atoms)
        for loc, _ in atoms:
            if loc <= 0:
                raise ValueError("atom locations must be positive")
        object.__setattr__(self, "atoms", atoms)
        if self.breaks is None:
            object.__setattr__(self, "breaks", tuple(sorted({loc for loc, _ in atoms})))
        else:
            object.__setattr__(self, "breaks", tuple(sorted(set(float(b) for b in self.breaks))))

    @classmethod
    def zeros(cls, grid: Grid, breaks: Sequence[float] = ()) -> "DistributionField":
        return cls(grid, np.zeros(len(grid)), (), tuple(breaks))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable, atoms=()) -> "DistributionField":
        return cls(grid, fn(grid.points), tuple(atoms))

    @property
    def break_indices(self) -> tuple[int, ...]:
        return tuple(self.grid.index_of(b) for b in self.breaks)

    def atom_weight(self, location: float) -> float:
        return sum(w for loc, w in self.atoms if loc == location)

    def scaled(self, factor: float) -> "DistributionField":
        return DistributionField(
            self.grid, factor * self.regular, tuple((l, factor * w) for l, w in self.atoms), self.breaks
        )

    def __add__(self, other: "DistributionField") -> "DistributionField":
        if other.grid is not self.grid:
            raise ValueError("fields live on different grids")
        merged: dict[float, float] = {}
        for loc, w in self.atoms + other.atoms:
            merged[loc] = merged.get(loc, 0.0) + w
        return DistributionField(
            self.grid, self.regular + other.regular, tuple(sorted(merged.items())),
            self.breaks + other.breaks,
        )

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def __mul__(self, factor: float):
        return self.scaled(factor)

    __rmul__ = __mul__

    def moment(self, order: int) -> float:
        """Quadrature over the regular part (down to 0) plus exact atom terms."""
        m = self.grid.points
        reg = self.grid.integrate(m**order * self.regular, self.break_indices, from_origin=True)
        return reg + sum(w * loc**order for loc, w in self.atoms)


@dataclass(frozen=True)
class SeriesTerm:
    """``u_k(t, m) = spatial(m) * t**order``."""

    order: int
    spatial: DistributionField

    def at(self, t: float) -> DistributionField:
        return self.spatial.scaled(float(t) ** self.order)


# ---------------------------------------------------------------------------
# kernels

Factor = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _ident(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class BreakageKernel:
    """Selection rate ``a(m)`` and fragment distribution ``k(m|n)``.

    ``birth_factors`` optionally writes ``k(m|n) a(n)`` as
    ``sum f(m) h(n)``, which lets the birth integral be done with cumulative
    sums instead of a dense matrix.
    """

    name: str
    rate: Callable[[np.ndarray], np.ndarray]
    distribution: Callable[[np.ndarray, np.ndarray], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    birth_factors: tuple[Factor, ...] = ()
    fbar: float | None = None
    mass_conserving: bool = True
    kind = "breakage"


@dataclass(frozen=True, eq=False)
class AggregationKernel:
    """Symmetric aggregation rate ``g(m, n)``; ``factors`` give ``g = sum phi(m) psi(n)``."""

    name: str
    rate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    factors: tuple[Factor, ...] = ()
    kind = "aggregation"


KernelSpec = Union[BreakageKernel, AggregationKernel]


def binary_linear() -> BreakageKernel:
    """Random binary breakup ``k = 2/n`` with ``a(m) = m``."""
    return BreakageKernel(
        "binary_linear", _ident, lambda m, n: 2.0 / n * _ones(m),
        birth_factors=((lambda m: 2.0 * _ones(m), _ones),), fbar=2.0,
    )


def binary_quadratic() -> BreakageKernel:
    """Random binary breakup ``k = 2/n`` with ``a(m) = m**2``."""
    return BreakageKernel(
        "binary_quadratic", lambda m: np.asarray(m, float) ** 2, lambda m, n: 2.0 / n * _ones(m),
        birth_factors=((lambda m: 2.0 * _ones(m), _ident),), fbar=2.0,
    )


def power_law(alpha: float) -> BreakageKernel:
    """``a(m) = m**alpha``, ``k(m|n) = (alpha/n) (m/n)**(alpha - 2)``."""
    alpha = float(alpha)
    if not alpha > 1.0:
        raise ValueError(f"power-law kernel needs alpha > 1, got {alpha}")
    if alpha > 2.0:
        warnings.warn(f"alpha={alpha} > 2 gives fewer than 2 fragments on average", stacklevel=2)
    return BreakageKernel(
        "power_law",
        lambda m: np.asarray(m, float) ** alpha,
        lambda m, n: alpha / n * (np.asarray(m, float) / n) ** (alpha - 2.0),
        params={"alpha": alpha},
        birth_factors=((lambda m: alpha * np.asarray(m, float) ** (alpha - 2.0), _ident),),
        fbar=alpha / (alpha - 1.0),
    )


def austin(psi: float, lam: float, gam: float, rate_exponent: float = 1.0) -> BreakageKernel:
    """Two-term power-law fragment distribution with ``a(m) = m**rate_exponent``.

    Taken as written it integrates to one fragment and does not conserve
    mass; it is offered for numerical experiments only.
    """
    psi, lam, gam, b = map(float, (psi, lam, gam, rate_exponent))

    def dist(m, n):
        m = np.asarray(m, float)
        return (1 - psi) * lam * m ** (lam - 1) / n**lam + psi * gam * m ** (gam - 1) / n**gam

    kern = BreakageKernel(
        "austin", lambda m: np.asarray(m, float) ** b, dist,
        params={"psi": psi, "lambda": lam, "gamma": gam, "rate_exponent": b},
        birth_factors=(
            (lambda m: (1 - psi) * lam * np.asarray(m, float) ** (lam - 1), lambda n: np.asarray(n, float) ** (b - lam)),
            (lambda m: psi * gam * np.asarray(m, float) ** (gam - 1), lambda n: np.asarray(n, float) ** (b - gam)),
        ),
        mass_conserving=False,
    )
    mass = (1 - psi) * lam / (lam + 1) + psi * gam / (gam + 1)
    if abs(mass - 1.0) > 1e-6:
        warnings.warn(f"austin kernel does not conserve mass (fragment mass ratio {mass:.6g})", stacklevel=2)
    return kern


def custom_breakage(rate, distribution, name: str = "custom", mass_conserving: bool = True) -> BreakageKernel:
    return BreakageKernel(name, rate, distribution, mass_conserving=mass_conserving)


def constant_kernel() -> AggregationKernel:
    return AggregationKernel("constant", lambda m, n: _ones(np.asarray(m, float) + np.asarray(n, float)),
                             factors=((_ones, _ones),))


def sum_kernel() -> AggregationKernel:
    return AggregationKernel("sum", lambda m, n: np.asarray(m, float) + np.asarray(n, float),
                             factors=((_ident, _ones), (_ones, _ident)))


def product_kernel() -> AggregationKernel:
    return AggregationKernel("product", lambda m, n: np.asarray(m, float) * np.asarray(n, float),
                             factors=((_ident, _ident),))


def custom_aggregation(rate, name: str = "custom") -> AggregationKernel:
    return AggregationKernel(name, rate)


def require_breakage(kernel) -> BreakageKernel:
    if getattr(kernel, "kind", None) != "breakage":
        raise KernelKindError(f"{getattr(kernel, 'name', kernel)!r} is not a breakage kernel")
    return kernel


def require_aggregation(kernel) -> AggregationKernel:
    if getattr(kernel, "kind", None) != "aggregation":
        raise KernelKindError(f"{getattr(kernel, 'name', kernel)!r} is not an aggregation kernel")
    return kernel


def fragment_number(kernel: BreakageKernel) -> float:
    """Mean number of fragments per breakage event."""
    require_breakage(kernel)
    if kernel.fbar is not None:
        return float(kernel.fbar)
    val, _ = integrate.quad(lambda m: float(kernel.distribution(np.array(m), 1.0)), 0.0, 1.0, limit=200)
    return float(val)


def kernel_closure_check(kernel: BreakageKernel, parent: float, grid: Grid) -> tuple[float, float]:
    """Return ``(integral of k(m|n), mass ratio)`` for parent size ``n``.

    The piece below the first grid point is done adaptively (power-law
    kernels are integrably singular at 0); the rest uses the grid rule.
    """
    require_breakage(kernel)
    n = float(parent)
    if not grid.m_min < n <= grid.m_max:
        raise GridError(f"parent size {n:g} outside grid range")
    x = grid.points[grid.points < n]
    x = np.append(x, n)
    k = kernel.distribution(x, n)
    lo = float(grid.points[0])
    number_lo, _ = integrate.quad(lambda m: float(kernel.distribution(np.array(m), n)), 0.0, lo, limit=200)
    mass_lo, _ = integrate.quad(lambda m: m * float(kernel.distribution(np.array(m), n)), 0.0, lo, limit=200)
    w = quad.node_weights(x)
    number = number_lo + float(w @ k)
    mass = mass_lo + float(w @ (x * k))
    return number, mass / n


# ---------------------------------------------------------------------------
# initial conditions


@dataclass(frozen=True, eq=False)
class InitialCondition:
    name: str
    density: Callable[[np.ndarray], np.ndarray] | None = None
    atoms: tuple[tuple[float, float], ...] = ()
    sampled: DistributionField | None = None

    @property
    def smooth(self) -> bool:
        return not self.atoms and not (self.sampled is not None and self.sampled.atoms)

    def sample(self, grid: Grid) -> DistributionField:
        if self.sampled is not None:
            if self.sampled.grid is not grid:
                raise GridError("sampled initial condition lives on a different grid")
            return self.sampled
        reg = self.density(grid.points) if self.density is not None else np.zeros(len(grid))
        fld = DistributionField(grid, reg, self.atoms)
        fld.break_indices  # atoms must sit on grid points
        return fld


def monodisperse(location: float = 1.0) -> InitialCondition:
    return InitialCondition("monodisperse", None, ((float(location), 1.0),))


def exponential() -> InitialCondition:
    return InitialCondition("exponential", lambda m: np.exp(-np.asarray(m, float)))


def exponential_over_m() -> InitialCondition:
    return InitialCondition("exponential_over_m", lambda m: np.exp(-np.asarray(m, float)) / np.asarray(m, float))


def custom_sampled(field_: DistributionField) -> InitialCondition:
    return InitialCondition("custom", sampled=field_)


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True, eq=False)
class Scenario:
    kernel: KernelSpec
    ic: InitialCondition
    grid: Grid
    times: tuple[float, ...] = (0.0,)
    order: int = 0

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if any(t < 0 for t in times) or list(times) != sorted(times):
            raise ValueError("times must be non-negative and ascending")
        object.__setattr__(self, "times", times)
        if int(self.order) != self.order or not 0 <= self.order <= MAX_ORDER:
            raise UnsupportedOrderError(f"order must be an integer in [0, {MAX_ORDER}]")
        object.__setattr__(self, "order", int(self.order))


def tail_bound(m_max: float) -> float:
    """``exp(-m_max)``: tail mass neglected by truncating an exponential IC."""
    return math.exp(-m_max)
