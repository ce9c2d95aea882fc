"""Moments, residuals of exact solutions, scaling and truncation studies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import closedform as cf
from .core import DistributionField, Grid
from .engine import SeriesState, evaluate_series
from .oracle import aggregation_rhs, fragmentation_operator

PLOT_FLOOR = 1e-12


def moment(fld: DistributionField, order: int) -> float:
    """``int m**order c dm``: regular part by quadrature plus atoms exactly."""
    if order < 0:
        raise ValueError("order must be non-negative")
    return fld.moment(order)


# ---------------------------------------------------------------------------
# residuals


@dataclass
class Residual:
    pde: float
    initial: float
    atom: float = 0.0

    @property
    def value(self) -> float:
        return max(self.pde, self.initial, self.atom)


def pde_residual(kernel, initial: DistributionField, solution: Callable[[float], DistributionField],
                 t: float, dt: float = 1e-4) -> Residual:
    """Substitute ``solution(t)`` into the governing equation.

    The time derivative is a centred difference; the size integrals use the
    grid quadrature.  The equation residual is scaled by ``max |dc/dt|`` and
    the initial-condition defect by ``max |c(0)|``.
    """
    grid = initial.grid
    now = solution(t)
    t_lo = max(t - dt, 0.0)
    lo, hi = solution(t_lo), solution(t + dt)
    dcdt = (hi.regular - lo.regular) / (t + dt - t_lo)
    if kernel.kind == "aggregation":
        rhs = aggregation_rhs(kernel, grid)(now.regular)
        atom_res = 0.0
    else:
        op = fragmentation_operator(kernel, grid, now.break_indices)
        rhs = op @ now.regular
        atom_res = 0.0
        for loc, w in now.atoms:
            a_loc = float(kernel.rate(np.array(loc)))
            below = grid.points <= loc
            rhs[below] += kernel.distribution(grid.points[below], loc) * a_loc * w
            dw = (hi.atom_weight(loc) - lo.atom_weight(loc)) / (t + dt - t_lo)
            atom_res = max(atom_res, abs(dw + a_loc * w) / max(abs(dw), 1e-300))
    scale = max(float(np.max(np.abs(dcdt))), 1e-300)
    pde = float(np.max(np.abs(dcdt - rhs))) / scale

    start = solution(0.0)
    ic_scale = max(float(np.max(np.abs(initial.regular), initial=0.0)),
                   max((abs(w) for _, w in initial.atoms), default=0.0))
    ic_reg = float(np.max(np.abs(start.regular - initial.regular)))
    locs = {loc for loc, _ in start.atoms} | {loc for loc, _ in initial.atoms}
    ic_atoms = max((abs(start.atom_weight(l) - initial.atom_weight(l)) for l in locs), default=0.0)
    return Residual(pde, max(ic_reg, ic_atoms) / ic_scale, atom_res)


def residual_check(case, t: float, grid: Grid, form: str = "reference", dt: float = 1e-4) -> float:
    """Scaled residual of an exact solution of ``case`` at time ``t``.

    ``form="printed"`` substitutes the summed limit as printed for random
    binary breakup with quadratic rate from ``exp(-m)`` instead of the
    repaired one.
    """
    case = cf.as_case(case)
    kernel, ic = cf.case_kernel(case), cf.case_ic(case)
    initial = ic.sample(grid)
    if form == "reference":
        def solution(s):
            return cf.reference_field(case, s, grid)
    elif form == "printed":
        if case.id is not cf.CaseId.FRAG_QUAD_EXP:
            raise ValueError("a printed variant exists only for frag_quad_exp")

        def solution(s):
            reg, w = cf.printed_quad_exp_limit(s, grid.points)
            return DistributionField(grid, reg, ((1.0, w),))
    else:
        raise ValueError(f"unknown form {form!r}")
    return pde_residual(kernel, initial, solution, t, dt).value


# ---------------------------------------------------------------------------
# scaling


def scaling_target(z):
    z = np.asarray(z, float)
    return z * np.exp(-z)


@dataclass
class ScalingReport:
    alpha: float
    times: list[float]
    z_points: np.ndarray
    target: np.ndarray
    transformed: list[np.ndarray] = field(default_factory=list)
    deviations: list[float] = field(default_factory=list)

    @property
    def final_deviation(self) -> float:
        return self.deviations[-1]

    @property
    def monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.deviations, self.deviations[1:]))


def scaling_report(alpha: float, times: Sequence[float], z_grid) -> ScalingReport:
    """Compare ``m**2 c / alpha`` at ``m = (z/t)**(1/alpha)`` with ``z exp(-z)``.

    ``c`` is the exact power-law breakage solution from ``exp(-m)``.  An
    infinite time gives the algebraic limit.
    """
    alpha = float(alpha)
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    times = [float(t) for t in times]
    if any(t <= 0 for t in times) or times != sorted(times):
        raise ValueError("times must be positive and ascending")
    z = np.asarray(z_grid, float)
    target = scaling_target(z)
    case = cf.Case(cf.CaseId.FRAG_POWER_LAW_EXP, alpha)
    rep = ScalingReport(alpha, times, z, target)
    for t in times:
        if math.isinf(t):
            vals = target.copy()
        else:
            m = (z / t) ** (1.0 / alpha)
            vals = m * m * cf.reference_solution(case, t, m) / alpha
        rep.transformed.append(vals)
        rep.deviations.append(float(np.max(np.abs(vals - target))))
    return rep


# ---------------------------------------------------------------------------
# truncation


def _full_and_truncated(source, t: float, order: int, grid: Grid | None):
    if isinstance(source, SeriesState):
        full = evaluate_series(source, t).regular
        approx = evaluate_series(source, t, order).regular
        return source.scenario.grid.points, full, approx
    case = cf.as_case(source)
    if grid is None:
        raise ValueError("a grid is needed when truncating a closed-form case")
    m = grid.points
    return m, cf.reference_solution(case, t, m), cf.partial_sum(case, order, t, m)


def truncation_frontier(source, t: float, order: int, rel_tol: float, grid: Grid | None = None) -> float:
    """Largest size below which the order-``order`` partial sum stays within ``rel_tol``.

    Scans upward from the smallest size and stops at the first point whose
    relative error exceeds the tolerance; points where the full solution is
    below the plotting floor are skipped.  Returns 0 if the first point fails.
    """
    m, full, approx = _full_and_truncated(source, t, order, grid)
    with np.errstate(all="ignore"):
        rel = np.abs(approx - full) / np.abs(full)
    bad = (np.abs(full) >= PLOT_FLOOR) & ~(rel <= rel_tol)
    hits = np.nonzero(bad)[0]
    if hits.size == 0:
        return float(m[-1])
    return float(m[hits[0] - 1]) if hits[0] > 0 else 0.0


def decades_covered(source, t: float, m_front: float, grid: Grid | None = None) -> float:
    """``log10`` of the spread of the full solution over ``(0, m_front]``."""
    m, full, _ = _full_and_truncated(source, t, 0, grid)
    sel = (m <= m_front) & (np.abs(full) >= PLOT_FLOOR)
    if not np.any(sel):
        return 0.0
    vals = np.abs(full[sel])
    return float(np.log10(vals.max() / vals.min()))


@dataclass
class TruncationStudy:
    m: np.ndarray
    full: np.ndarray
    truncated: dict[int, np.ndarray]
    frontier: dict[int, float]
    decades: dict[int, float]


def truncation_study(source, t: float, orders: Sequence[int], rel_tol: float = 0.05,
                     grid: Grid | None = None) -> TruncationStudy:
    """Truncated partial sums against the full solution, with frontiers."""
    curves, fronts, decs = {}, {}, {}
    m = full = None
    for n in orders:
        m, full, approx = _full_and_truncated(source, t, n, grid)
        curves[n] = approx
        fronts[n] = truncation_frontier(source, t, n, rel_tol, grid)
        decs[n] = decades_covered(source, t, fronts[n], grid)
    return TruncationStudy(m, full, curves, fronts, decs)


def fragment_distribution(alpha: float, parent: float, m) -> np.ndarray:
    """``k(m|n) = (alpha/n) (m/n)**(alpha - 2)`` for ``m < n``, zero above."""
    m = np.asarray(m, float)
    return np.where(m < parent, alpha / parent * (m / parent) ** (alpha - 2.0), 0.0)
