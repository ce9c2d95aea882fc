import math

import numpy as np
import pytest
from scipy import integrate

from hpmpbe import closedform as cf
from hpmpbe import core, diagnostics, engine
from hpmpbe.closedform import Case, CaseId

RES_GRID = core.aligned_grid(40.0, 2000)
POWER = Case(CaseId.FRAG_POWER_LAW_EXP, 1.5)


def test_moment_wrapper():
    fld = core.exponential().sample(RES_GRID)
    assert diagnostics.moment(fld, 2) == pytest.approx(2.0, rel=1e-7)
    with pytest.raises(ValueError):
        diagnostics.moment(fld, -1)


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_repaired_limit_solves_equation(t):
    assert diagnostics.residual_check(CaseId.FRAG_QUAD_EXP, t, RES_GRID) < 1e-4


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_printed_limit_does_not(t):
    assert diagnostics.residual_check(CaseId.FRAG_QUAD_EXP, t, RES_GRID, form="printed") > 1e-2


@pytest.mark.parametrize("case", [Case(CaseId.FRAG_LINEAR_EXP), Case(CaseId.FRAG_LINEAR_MONO),
                                  Case(CaseId.AGG_CONST_EXP), Case(CaseId.AGG_SUM_EXP)], ids=lambda c: c.label())
def test_exact_solutions_have_small_residual(case):
    # the sum-kernel tail decays like exp(-0.14 m) at t = 1/2
    grid = core.aligned_grid(200.0, 5000) if case.id is CaseId.AGG_SUM_EXP else RES_GRID
    assert diagnostics.residual_check(case, 0.5, grid) < 1e-3


def test_residual_flags_a_wrong_solution():
    kern = core.binary_linear()
    init = core.exponential().sample(RES_GRID)

    def wrong(t):
        return core.DistributionField(RES_GRID, (1 + 2 * t) * np.exp(-RES_GRID.points * (1 + t)))

    res = diagnostics.pde_residual(kern, init, wrong, 0.5)
    assert res.initial < 1e-14 and res.pde > 0.1


def test_residual_form_validation():
    with pytest.raises(ValueError):
        diagnostics.residual_check(CaseId.FRAG_LINEAR_EXP, 0.5, RES_GRID, form="printed")
    with pytest.raises(ValueError):
        diagnostics.residual_check(CaseId.FRAG_QUAD_EXP, 0.5, RES_GRID, form="other")


def test_scaling_approach():
    z = np.linspace(0.1, 8.0, 400)
    rep = diagnostics.scaling_report(1.5, [10, 100, 1000, math.inf], z)
    assert rep.monotone
    assert rep.deviations[2] < 0.05
    assert rep.final_deviation == 0.0
    assert np.allclose(rep.target, z * np.exp(-z))


def test_scaling_limit_algebra():
    # with z = t m**alpha fixed, m**2 c / alpha -> z exp(-z) as t grows
    alpha, z, t = 1.5, 2.0, 1e8
    m = (z / t) ** (1 / alpha)
    val = m * m * cf.reference_solution(POWER, t, m) / alpha
    assert val == pytest.approx(z * math.exp(-z), rel=1e-4)


def test_scaling_input_checks():
    z = np.linspace(0.1, 8.0, 10)
    with pytest.raises(ValueError):
        diagnostics.scaling_report(1.0, [10.0], z)
    with pytest.raises(ValueError):
        diagnostics.scaling_report(1.5, [100.0, 10.0], z)


def test_truncation_frontier_ordering():
    grid = core.make_grid("geometric", 1e-6, 30.0, 4000)
    study = diagnostics.truncation_study(POWER, 10.0, (2, 3, 12, 13), 0.05, grid)
    f = study.frontier
    assert f[13] > f[12] > f[3] > f[2] > 0
    assert study.decades[2] >= 2.0
    assert set(study.truncated) == {2, 3, 12, 13}
    sel = grid.points <= f[2]
    assert np.all(np.abs(study.truncated[2][sel] - study.full[sel]) <= 0.05 * np.abs(study.full[sel]))


def test_truncation_from_engine_state():
    grid = core.make_grid("geometric", 1e-4, 30.0, 3000)
    state = engine.build_series(core.Scenario(core.binary_linear(), core.exponential(), grid, (), 20))
    num = diagnostics.truncation_frontier(state, 1.0, 4, 0.05)
    ref = diagnostics.truncation_frontier(CaseId.FRAG_LINEAR_EXP, 1.0, 4, 0.05, grid)
    assert num == pytest.approx(ref, rel=1e-2)
    with pytest.raises(ValueError):
        diagnostics.truncation_frontier(CaseId.FRAG_LINEAR_EXP, 1.0, 4, 0.05)


def test_fragment_distribution():
    alpha = 1.5
    m = np.array([0.2, 0.5, 1.5])
    vals = diagnostics.fragment_distribution(alpha, 1.0, m)
    assert vals[-1] == 0.0
    assert np.allclose(vals[:2], alpha * m[:2] ** (alpha - 2))
    number, _ = integrate.quad(lambda x: diagnostics.fragment_distribution(alpha, 2.0, x), 0, 2.0)
    mass, _ = integrate.quad(lambda x: x * diagnostics.fragment_distribution(alpha, 2.0, x), 0, 2.0)
    assert number == pytest.approx(alpha / (alpha - 1), rel=1e-6)
    assert mass == pytest.approx(2.0, rel=1e-8)
