"""Direct method-of-lines solvers for the breakage and aggregation equations.

The size integrals are discretised with the same grid quadrature as the
series engine, and time is advanced with an adaptive embedded Runge-Kutta
pair.  No series expansion is involved.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import quadrature as quad
from .core import (
    DistributionField,
    Grid,
    HPMError,
    Scenario,
    require_aggregation,
    require_breakage,
)

logger = logging.getLogger(__name__)


class StiffnessError(HPMError, RuntimeError):
    pass


class GelationError(HPMError, RuntimeError):
    """Mass left the size range by more than 1%: the product-kernel gel point was crossed."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    fields: list[DistributionField] = field(default_factory=list)
    moment_log: list[tuple[float, float]] = field(default_factory=list)

    def at(self, t: float) -> DistributionField:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not stored")
        return self.fields[i]


def _output_times(scenario: Scenario, t_end: float) -> list[float]:
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    return sorted({t for t in scenario.times if t <= t_end} | {float(t_end)})


def tail_weight_matrix(grid: Grid, breaks=()) -> np.ndarray:
    """``W @ y`` gives ``int_{m_i}^{m_max} y`` at every grid point."""
    idx, w = grid.rule(breaks)
    n = len(grid)
    per_interval = np.zeros((n - 1, n))
    rows = np.repeat(np.arange(n - 1), idx.shape[1])
    np.add.at(per_interval, (rows, idx.ravel()), w.ravel())
    out = np.zeros((n, n))
    out[:-1] = np.cumsum(per_interval[::-1], axis=0)[::-1]
    return out


def fragmentation_operator(kernel, grid: Grid, breaks=()) -> np.ndarray:
    """Dense matrix of ``c -> -a c + int_m k(m|n) a(n) c(n) dn``."""
    require_breakage(kernel)
    m = grid.points
    with np.errstate(all="ignore"):
        kmat = kernel.distribution(m[:, None], m[None, :]) * kernel.rate(m)[None, :]
    kmat[~np.isfinite(kmat)] = 0.0
    op = tail_weight_matrix(grid, breaks) * kmat
    op[np.diag_indices_from(op)] -= kernel.rate(m)
    return op


def _finish(traj: Trajectory, grid: Grid, sol, atoms_at) -> Trajectory:
    for t, y in zip(sol.t, sol.y.T):
        fld = DistributionField(grid, y, atoms_at(t), breaks=tuple(loc for loc, _ in atoms_at(0.0)))
        traj.times.append(float(t))
        traj.fields.append(fld)
        traj.moment_log.append((fld.moment(0), fld.moment(1)))
    return traj


def _initial_only(grid: Grid, c0: DistributionField) -> Trajectory:
    return Trajectory([0.0], [c0], [(c0.moment(0), c0.moment(1))])


def solve_fragmentation_direct(scenario: Scenario, t_end: float, tol: float = 1e-8,
                               method: str = "RK45") -> Trajectory:
    """Integrate the breakage equation to ``t_end``.

    Atoms in the initial condition decay analytically as
    ``exp(-a(loc) t)`` and feed ``k(m|loc) a(loc)`` into the regular part.
    """
    kernel, grid = require_breakage(scenario.kernel), scenario.grid
    c0 = scenario.ic.sample(grid)
    breaks = c0.break_indices
    op = fragmentation_operator(kernel, grid, breaks)
    m = grid.points
    atoms0 = c0.atoms
    rates = [float(kernel.rate(np.array(loc))) for loc, _ in atoms0]
    sources = []
    for (loc, w), a_loc in zip(atoms0, rates):
        with np.errstate(all="ignore"):
            s = np.where(m <= loc, kernel.distribution(m, loc) * a_loc * w, 0.0)
        sources.append(np.where(np.isfinite(s), s, 0.0))

    def atoms_at(t):
        return tuple((loc, w * np.exp(-a * t)) for (loc, w), a in zip(atoms0, rates))

    def rhs(t, y):
        out = op @ y
        for s, a in zip(sources, rates):
            out += s * np.exp(-a * t)
        return out

    times = _output_times(scenario, t_end)
    if times[-1] == 0.0:
        return _initial_only(grid, c0)
    sol = solve_ivp(rhs, (0.0, times[-1]), c0.regular, method=method, t_eval=times,
                    rtol=tol, atol=tol * 1e-2)
    if sol.status < 0:
        raise StiffnessError(f"fragmentation integration failed: {sol.message}")
    traj = _finish(Trajectory(), grid, sol, atoms_at)
    drift = abs(traj.moment_log[-1][1] - traj.moment_log[0][1])
    logger.debug("fragmentation to t=%g: %d rhs evaluations, M1 drift %.3g", t_end, sol.nfev, drift)
    return traj


def aggregation_rhs(kernel, grid: Grid):
    """Right-hand side ``c -> birth - death`` on an origin-aligned grid."""
    require_aggregation(kernel)
    if not grid.aligned:
        raise ValueError("aggregation needs an origin-aligned uniform grid")
    h = grid.spacing
    m = grid.points
    n = len(grid)
    wfull = h * quad.uniform_weights(n + 1)
    nodes = np.concatenate(([0.0], m))

    def extend(y):
        return np.concatenate(([quad.extrapolate_origin(m, y)], y))

    if kernel.factors:
        phis = [(phi(m), psi(m)) for phi, psi in kernel.factors]

        def rhs(y):
            birth = np.zeros(n + 1)
            death = np.zeros(n)
            for ph, ps in phis:
                left, right = extend(ph * y), extend(ps * y)
                birth += quad.uniform_convolution(left, right, h)
                death += ph * float(wfull @ right)
            return 0.5 * birth[1:] - y * death
    else:
        gmat = kernel.rate(m[:, None], nodes[None, :])

        def rhs(y):
            ye = extend(y)
            birth = np.empty(n)
            for p in range(1, n + 1):
                q = np.arange(p + 1)
                vals = kernel.rate(nodes[p] - nodes[q], nodes[q]) * ye[p - q] * ye[q]
                birth[p - 1] = h * np.sum(quad.uniform_weights(p + 1) * vals)
            return 0.5 * birth - y * (gmat @ (wfull * ye))

    return rhs


def solve_aggregation_direct(scenario: Scenario, t_end: float, tol: float = 1e-8,
                             method: str = "RK45") -> Trajectory:
    """Integrate the aggregation equation; aborts if mass drifts by more than 1%."""
    kernel, grid = require_aggregation(scenario.kernel), scenario.grid
    c0 = scenario.ic.sample(grid)
    if c0.atoms:
        raise HPMError("the direct aggregation solver needs a smooth initial condition")
    f = aggregation_rhs(kernel, grid)
    mass0 = c0.moment(1)
    m = grid.points

    def mass_loss(t, y):
        fld_mass = grid.integrate(m * y, from_origin=True)
        return fld_mass - 0.99 * mass0

    mass_loss.terminal = True
    mass_loss.direction = -1

    times = _output_times(scenario, t_end)
    if times[-1] == 0.0:
        return _initial_only(grid, c0)
    sol = solve_ivp(lambda t, y: f(y), (0.0, times[-1]), c0.regular, method=method, t_eval=times,
                    rtol=tol, atol=tol * 1e-2, events=mass_loss)
    if sol.status < 0:
        raise StiffnessError(f"aggregation integration failed: {sol.message}")
    if sol.status == 1:
        tg = float(sol.t_events[0][0])
        raise GelationError(f"first moment fell 1% below its initial value at t={tg:.6g} (gelation)", tg)
    return _finish(Trajectory(), grid, sol, lambda t: ())


def solve_direct(scenario: Scenario, t_end: float, tol: float = 1e-8) -> Trajectory:
    if scenario.kernel.kind == "aggregation":
        return solve_aggregation_direct(scenario, t_end, tol)
    return solve_fragmentation_direct(scenario, t_end, tol)
