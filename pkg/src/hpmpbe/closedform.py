"""Exact series terms and reference solutions for the solved cases.

A term ``u_k(t, m)`` is a list of :class:`PolyExpTerm`; each evaluates to
``coefficient * m**m_exponent * t**t_exponent * exp(-decay * m)``, times
``delta(m - 1)`` when ``atom`` is set or ``theta(1 - m)`` when ``step`` is
set.  The step uses the left-limit convention ``theta(0) = 1``, matching
how discontinuous fields are stored on grids.

Printed formulas were repaired where they do not satisfy the governing
equation; see ``ERRATA``.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from . import core
from .core import DistributionField, DomainError, Grid, UnsupportedOrderError
from .specialfn import bessel_i1e

ERRATA = {
    "frag_linear_mono u0": "delta(m) -> delta(m - 1)",
    "frag_linear_mono u_k": "general term rebuilt from the summed solution; atom part (-t)^k/k! restored",
    "frag_linear_mono sum": "theta(a - m) -> theta(1 - m)",
    "frag_quad_mono u_k": "x -> m, delta(t - 1) -> delta(m - 1), theta(1 - t) -> theta(1 - m)",
    "frag_quad_mono sum": "2 a t -> 2 t",
    "frag_linear_exp u_k": "t and m exchanged, trailing exp(-t) -> exp(-m)",
    "frag_quad_exp sum": "monodisperse limit replaced by exp(-m - t m^2) (1 + 2 t (1 + m))",
    "agg_sum_exp u4": "t^3 -> t^4",
}


class CaseId(str, enum.Enum):
    FRAG_LINEAR_MONO = "frag_linear_mono"
    FRAG_LINEAR_EXP = "frag_linear_exp"
    FRAG_QUAD_MONO = "frag_quad_mono"
    FRAG_QUAD_EXP = "frag_quad_exp"
    FRAG_POWER_LAW_EXP = "frag_power_law_exp"
    AGG_CONST_EXP = "agg_const_exp"
    AGG_SUM_EXP = "agg_sum_exp"
    AGG_PRODUCT_EXP = "agg_product_exp"
    AGG_PRODUCT_EXP_OVER_M = "agg_product_exp_over_m"


@dataclass(frozen=True)
class Case:
    id: CaseId
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "id", CaseId(self.id))
        if self.id is CaseId.FRAG_POWER_LAW_EXP:
            if self.alpha is None:
                raise ValueError("frag_power_law_exp needs alpha")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise ValueError(f"{self.id.value} takes no alpha")

    @property
    def is_fragmentation(self) -> bool:
        return self.id.value.startswith("frag")

    @property
    def is_monodisperse(self) -> bool:
        return self.id in (CaseId.FRAG_LINEAR_MONO, CaseId.FRAG_QUAD_MONO)

    @property
    def max_order(self) -> int:
        return 4 if self.id is CaseId.AGG_SUM_EXP else core.MAX_ORDER

    def label(self) -> str:
        return self.id.value if self.alpha is None else f"{self.id.value}(alpha={self.alpha:g})"


def as_case(case) -> Case:
    if isinstance(case, Case):
        return case
    return Case(CaseId(case))


ALL_CASES = (
    Case(CaseId.FRAG_LINEAR_MONO),
    Case(CaseId.FRAG_LINEAR_EXP),
    Case(CaseId.FRAG_QUAD_MONO),
    Case(CaseId.FRAG_QUAD_EXP),
    Case(CaseId.FRAG_POWER_LAW_EXP, 1.5),
    Case(CaseId.AGG_CONST_EXP),
    Case(CaseId.AGG_SUM_EXP),
    Case(CaseId.AGG_PRODUCT_EXP),
    Case(CaseId.AGG_PRODUCT_EXP_OVER_M),
)


def case_kernel(case) -> core.KernelSpec:
    case = as_case(case)
    return {
        CaseId.FRAG_LINEAR_MONO: core.binary_linear,
        CaseId.FRAG_LINEAR_EXP: core.binary_linear,
        CaseId.FRAG_QUAD_MONO: core.binary_quadratic,
        CaseId.FRAG_QUAD_EXP: core.binary_quadratic,
        CaseId.FRAG_POWER_LAW_EXP: lambda: core.power_law(case.alpha),
        CaseId.AGG_CONST_EXP: core.constant_kernel,
        CaseId.AGG_SUM_EXP: core.sum_kernel,
        CaseId.AGG_PRODUCT_EXP: core.product_kernel,
        CaseId.AGG_PRODUCT_EXP_OVER_M: core.product_kernel,
    }[case.id]()


def case_ic(case) -> core.InitialCondition:
    case = as_case(case)
    if case.is_monodisperse:
        return core.monodisperse(1.0)
    if case.id is CaseId.AGG_PRODUCT_EXP_OVER_M:
        return core.exponential_over_m()
    return core.exponential()


# ---------------------------------------------------------------------------
# term algebra


@dataclass(frozen=True)
class PolyExpTerm:
    coefficient: float
    m_exponent: float
    t_exponent: int
    decay: float = 0.0
    atom: bool = False
    step: bool = False

    def regular(self, t, m):
        if self.atom:
            return np.zeros_like(np.asarray(m, float))
        m = np.asarray(m, float)
        val = self.coefficient * m**self.m_exponent * float(t) ** self.t_exponent * np.exp(-self.decay * m)
        if self.step:
            val = np.where(m <= 1.0, val, 0.0)
        return val

    def atom_weight(self, t) -> float:
        if not self.atom:
            return 0.0
        return self.coefficient * float(t) ** self.t_exponent * math.exp(-self.decay)

    def moment(self, order: int) -> float:
        """Exact ``integral m**order * term dm`` at t = 1."""
        if self.atom:
            return self.coefficient * math.exp(-self.decay)
        p = self.m_exponent + order
        if p <= -1:
            return math.inf if self.coefficient else 0.0
        if self.step:
            if self.decay:
                raise NotImplementedError("step terms with exponential decay")
            return self.coefficient / (p + 1)
        return self.coefficient * math.exp(math.lgamma(p + 1) - (p + 1) * math.log(self.decay))


def evaluate_terms(terms: Iterable[PolyExpTerm], t, m):
    """Regular part of a term list at ``(t, m)``."""
    m = np.asarray(m, float)
    out = np.zeros_like(m)
    for term in terms:
        out = out + term.regular(t, m)
    return out


def atom_weight(terms: Iterable[PolyExpTerm], t) -> float:
    """Weight of ``delta(m - 1)`` in a term list."""
    return sum(term.atom_weight(t) for term in terms)


def terms_moment(terms: Iterable[PolyExpTerm], order: int) -> float:
    return sum(term.moment(order) for term in terms)


def terms_to_json(terms: Iterable[PolyExpTerm]) -> str:
    return json.dumps([asdict(t) for t in terms], sort_keys=True)


def terms_from_json(text: str) -> list[PolyExpTerm]:
    return [PolyExpTerm(**d) for d in json.loads(text)]


def _fact(n: int) -> float:
    return float(math.factorial(n))


def _poly_exp(coeffs: dict[float, float], k: int) -> list[PolyExpTerm]:
    return [PolyExpTerm(c, p, k, 1.0) for p, c in sorted(coeffs.items()) if c != 0.0]


_SUM_EXP = {
    0: (1.0, [1]),
    1: (1 / 2, [-2, -2, 1]),
    2: (1 / 12, [6, 18, -3, -6, 1]),
    3: (1 / 144, [-24, -168, -60, 120, 12, -12, 1]),
    4: (1 / 2880, [120, 1800, 2100, -1800, -1180, 360, 70, -20, 1]),
}


def hpm_term(case, k: int) -> list[PolyExpTerm]:
    """Exact ``u_k`` as a list of terms carrying ``t**k``."""
    case = as_case(case)
    k = int(k)
    if k < 0:
        raise ValueError("order must be non-negative")
    if k > case.max_order:
        raise UnsupportedOrderError(
            f"{case.label()} has closed-form terms only up to order {case.max_order}"
        )
    cid = case.id
    sgn = (-1.0) ** k

    if cid is CaseId.FRAG_LINEAR_MONO:
        out = [PolyExpTerm(sgn / _fact(k), 0.0, k, atom=True)]
        if k >= 1:
            out.append(PolyExpTerm(2.0 * (-1.0) ** (k - 1) / _fact(k - 1), k - 1, k, step=True))
        if k >= 2:
            c = sgn / _fact(k - 2)
            out += [PolyExpTerm(c, k - 2, k, step=True), PolyExpTerm(-c, k - 1, k, step=True)]
        return out

    if cid is CaseId.FRAG_QUAD_MONO:
        out = [PolyExpTerm(sgn / _fact(k), 0.0, k, atom=True)]
        if k >= 1:
            out.append(PolyExpTerm(2.0 * (-1.0) ** (k - 1) / _fact(k - 1), 2 * k - 2, k, step=True))
        return out

    if cid is CaseId.FRAG_LINEAR_EXP:
        c = sgn / _fact(k)
        return _poly_exp({k: c, k - 1: -2.0 * k * c, k - 2: k * (k - 1) * c}, k)

    if cid in (CaseId.FRAG_QUAD_EXP, CaseId.FRAG_POWER_LAW_EXP):
        a = 2.0 if cid is CaseId.FRAG_QUAD_EXP else case.alpha
        c = sgn / _fact(k)
        return _poly_exp({a * k: c, a * k - 2: -a * k * c, a * k - 1: -a * k * c}, k)

    if cid is CaseId.AGG_CONST_EXP:
        pre = _fact(k + 1) / 2.0**k
        return _poly_exp(
            {k - r: pre * (-1.0) ** r / (_fact(r) * _fact(k - r + 1) * _fact(k - r)) for r in range(k + 1)}, k
        )

    if cid is CaseId.AGG_PRODUCT_EXP:
        return _poly_exp(
            {3 * k - 2 * r: 2.0 * (-1.0) ** r / (_fact(r) * _fact(k - r) * _fact(2 * k - 2 * r + 2))
             for r in range(k + 1)}, k
        )

    if cid is CaseId.AGG_PRODUCT_EXP_OVER_M:
        return _poly_exp(
            {2 * k - 1 - r: (-1.0) ** r / (_fact(r) * _fact(k - r + 1) * _fact(k - r)) for r in range(k + 1)}, k
        )

    if cid is CaseId.AGG_SUM_EXP:
        scale, poly = _SUM_EXP[k]
        return _poly_exp({j: scale * c for j, c in enumerate(poly)}, k)

    raise AssertionError(cid)


def partial_sum(case, n: int, t, m):
    """Regular part of ``sum_{k <= n} u_k`` at ``(t, m)``."""
    case = as_case(case)
    m = np.asarray(m, float)
    out = np.zeros_like(m)
    for k in range(int(n) + 1):
        out = out + evaluate_terms(hpm_term(case, k), t, m)
    return out


def partial_sum_atom(case, n: int, t) -> float:
    return sum(atom_weight(hpm_term(case, k), t) for k in range(int(n) + 1))


# ---------------------------------------------------------------------------
# reference solutions


def _product_exp_series(t: float, m: np.ndarray) -> np.ndarray:
    # sum_k t^k m^{3k} / ((k+1)! (2k+1)!) * exp(-(t+1) m), summed in log space
    m = np.asarray(m, float)
    out = np.zeros_like(m)
    if t == 0.0:
        return np.exp(-m)
    logx = np.log(t) + 3.0 * np.log(m)
    for k in range(0, 400):
        lt = k * logx - gammaln(k + 2) - gammaln(2 * k + 2) - (t + 1.0) * m
        term = np.exp(lt)
        out += term
        if k > 5 and np.all(term <= 1e-18 * out):
            break
    return out


# 1 / M2(0) for the product kernel
GEL_TIME = {CaseId.AGG_PRODUCT_EXP: 0.5, CaseId.AGG_PRODUCT_EXP_OVER_M: 1.0}


def reference_solution(case, t: float, m):
    """Regular part of the exact density ``c(t, m)``."""
    case = as_case(case)
    t = float(t)
    if t < 0:
        raise DomainError("t must be non-negative")
    m = np.asarray(m, float)
    if np.any(m <= 0):
        raise DomainError("m must be positive")
    cid = case.id
    below = m <= 1.0
    if cid is CaseId.FRAG_LINEAR_MONO:
        return np.where(below, np.exp(-t * m) * (2 * t + t * t * (1 - m)), 0.0)
    if cid is CaseId.FRAG_QUAD_MONO:
        return np.where(below, 2 * t * np.exp(-t * m * m), 0.0)
    if cid is CaseId.FRAG_LINEAR_EXP:
        return (1 + t) ** 2 * np.exp(-m * (1 + t))
    if cid is CaseId.FRAG_QUAD_EXP:
        return np.exp(-m - t * m * m) * (1 + 2 * t * (1 + m))
    if cid is CaseId.FRAG_POWER_LAW_EXP:
        a = case.alpha
        return np.exp(-m - t * m**a) * (1 + a * t * (m ** (a - 2) + m ** (a - 1)))
    if cid is CaseId.AGG_CONST_EXP:
        n = 2.0 / (t + 2.0)
        return n * n * np.exp(-n * m)
    if cid is CaseId.AGG_SUM_EXP:
        if t == 0.0:
            return np.exp(-m)
        tau = -math.expm1(-t)
        s = math.sqrt(tau)
        return (1 - tau) * np.exp(-m * (1 - s) ** 2) * bessel_i1e(2 * m * s) / (m * s)
    if cid is CaseId.AGG_PRODUCT_EXP:
        if t > GEL_TIME[cid]:
            raise DomainError("product kernel with exp(-m) gels at t = 1/2; reference needs t <= 1/2")
        return _product_exp_series(t, m)
    if cid is CaseId.AGG_PRODUCT_EXP_OVER_M:
        if t == 0.0:
            return np.exp(-m) / m
        s = math.sqrt(t)
        excess = (1 - s) ** 2 if t <= 1.0 else 0.0
        return bessel_i1e(2 * m * s) * np.exp(-excess * m) / (m * m * s)
    raise AssertionError(cid)


def reference_atom(case, t: float) -> float:
    """Weight of ``delta(m - 1)`` in the exact solution."""
    case = as_case(case)
    return math.exp(-float(t)) if case.is_monodisperse else 0.0


def reference_field(case, t: float, grid: Grid) -> DistributionField:
    case = as_case(case)
    atoms = ((1.0, reference_atom(case, t)),) if case.is_monodisperse else ()
    return DistributionField(grid, reference_solution(case, t, grid.points), atoms)


def printed_quad_exp_limit(t: float, m):
    """Summed limit printed for random binary breakup with ``a = m**2`` from ``exp(-m)``.

    Returns ``(regular, atom_weight)``; this is the monodisperse solution and
    does not start from ``exp(-m)``.
    """
    m = np.asarray(m, float)
    return np.where(m <= 1.0, 2 * t * np.exp(-t * m * m), 0.0), math.exp(-t)
