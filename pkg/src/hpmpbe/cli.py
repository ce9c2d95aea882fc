"""Batch front-end.

A run is described by a flat ``key = value`` file (``#`` starts a comment)::

    command = compare
    kernel = constant
    ic = exponential
    grid.kind = linear
    grid.max = 30
    grid.count = 2000
    times = 0.5, 1
    order = 25
    out_dir = out/const

Exit codes: 0 ok, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import closedform as cf
from . import core, diagnostics, engine, oracle
from .core import HPMError

logger = logging.getLogger("hpmpbe")

COMMANDS = ("solve", "compare", "truncation", "scaling", "oracle", "terms")
KERNELS = ("binary_linear", "binary_quadratic", "power_law", "austin", "constant", "sum", "product")
ICS = ("monodisperse", "exponential", "exponential_over_m")
KEYS = (
    "command", "kernel", "alpha", "psi", "lambda", "gamma", "rate_exponent", "ic",
    "grid.kind", "grid.min", "grid.max", "grid.count", "times", "order", "out_dir", "rel_tol", "tol",
)
TRUNCATION_ORDERS = (2, 3, 12, 13)

HEADERS = {
    "density": "m,c",
    "compare": "m,c_hpm,c_ref,c_oracle,rel_err_hpm,rel_err_oracle",
    "truncation": "m,c_full,c_k2,c_k3,c_k12,c_k13",
    "scaling": "z,phi_target,phi_t",
    "fragments": "m,k",
}


class ConfigError(HPMError, ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    kernel: str = "constant"
    ic: str = "exponential"
    alpha: float | None = None
    psi: float | None = None
    lam: float | None = None
    gamma: float | None = None
    rate_exponent: float = 1.0
    grid_kind: str = "linear"
    grid_min: float | None = None
    grid_max: float = 30.0
    grid_count: int = 2000
    times: tuple[float, ...] = (1.0,)
    order: int = 10
    out_dir: str = "out"
    rel_tol: float = 0.05
    tol: float = 1e-8
    raw: dict[str, str] = field(default_factory=dict)


def parse_config(text: str) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}; known keys: {', '.join(KEYS)}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return config_from_mapping(raw)


def _num(raw, key, conv=float, default=None):
    if key not in raw:
        return default
    try:
        return conv(raw[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw[key]!r}") from exc


def config_from_mapping(raw: dict[str, str]) -> RunConfig:
    unknown = set(raw) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}; known keys: {', '.join(KEYS)}")
    if "command" not in raw:
        raise ConfigError("missing key 'command'")
    if raw["command"] not in COMMANDS:
        raise ConfigError(f"unknown command {raw['command']!r}; expected one of {', '.join(COMMANDS)}")
    cfg = RunConfig(command=raw["command"], raw=dict(raw))
    cfg.kernel = raw.get("kernel", cfg.kernel)
    if cfg.kernel not in KERNELS:
        raise ConfigError(f"unknown kernel {cfg.kernel!r}; registry: {', '.join(KERNELS)}")
    cfg.ic = raw.get("ic", cfg.ic)
    if cfg.ic not in ICS:
        raise ConfigError(f"unknown ic {cfg.ic!r}; registry: {', '.join(ICS)}")
    cfg.alpha = _num(raw, "alpha")
    cfg.psi = _num(raw, "psi")
    cfg.lam = _num(raw, "lambda")
    cfg.gamma = _num(raw, "gamma")
    cfg.rate_exponent = _num(raw, "rate_exponent", default=1.0)
    cfg.grid_kind = raw.get("grid.kind", cfg.grid_kind)
    cfg.grid_min = _num(raw, "grid.min")
    cfg.grid_max = _num(raw, "grid.max", default=cfg.grid_max)
    cfg.grid_count = _num(raw, "grid.count", int, default=cfg.grid_count)
    if "times" in raw:
        try:
            cfg.times = tuple(float(s) for s in raw["times"].split(",") if s.strip())
        except ValueError as exc:
            raise ConfigError(f"bad times {raw['times']!r}") from exc
    cfg.order = _num(raw, "order", int, default=cfg.order)
    cfg.out_dir = raw.get("out_dir", cfg.out_dir)
    cfg.rel_tol = _num(raw, "rel_tol", default=cfg.rel_tol)
    cfg.tol = _num(raw, "tol", default=cfg.tol)
    if cfg.kernel == "power_law" and cfg.alpha is None:
        raise ConfigError("kernel power_law needs alpha")
    if cfg.kernel == "austin" and None in (cfg.psi, cfg.lam, cfg.gamma):
        raise ConfigError("kernel austin needs psi, lambda and gamma")
    return cfg


# ---------------------------------------------------------------------------
# building blocks


def build_kernel(cfg: RunConfig) -> core.KernelSpec:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {
            "binary_linear": core.binary_linear,
            "binary_quadratic": core.binary_quadratic,
            "power_law": lambda: core.power_law(cfg.alpha),
            "austin": lambda: core.austin(cfg.psi, cfg.lam, cfg.gamma, cfg.rate_exponent),
            "constant": core.constant_kernel,
            "sum": core.sum_kernel,
            "product": core.product_kernel,
        }[cfg.kernel]()


def build_ic(cfg: RunConfig) -> core.InitialCondition:
    return {"monodisperse": core.monodisperse, "exponential": core.exponential,
            "exponential_over_m": core.exponential_over_m}[cfg.ic]()


def build_grid(cfg: RunConfig) -> core.Grid:
    try:
        if cfg.grid_min is None:
            if cfg.grid_kind != "linear":
                raise ConfigError("grid.min is required for geometric grids")
            return core.aligned_grid(cfg.grid_max, cfg.grid_count)
        return core.make_grid(cfg.grid_kind, cfg.grid_min, cfg.grid_max, cfg.grid_count)
    except core.GridError as exc:
        raise ConfigError(str(exc)) from exc


_CASES = {
    ("binary_linear", "monodisperse"): cf.CaseId.FRAG_LINEAR_MONO,
    ("binary_linear", "exponential"): cf.CaseId.FRAG_LINEAR_EXP,
    ("binary_quadratic", "monodisperse"): cf.CaseId.FRAG_QUAD_MONO,
    ("binary_quadratic", "exponential"): cf.CaseId.FRAG_QUAD_EXP,
    ("power_law", "exponential"): cf.CaseId.FRAG_POWER_LAW_EXP,
    ("constant", "exponential"): cf.CaseId.AGG_CONST_EXP,
    ("sum", "exponential"): cf.CaseId.AGG_SUM_EXP,
    ("product", "exponential"): cf.CaseId.AGG_PRODUCT_EXP,
    ("product", "exponential_over_m"): cf.CaseId.AGG_PRODUCT_EXP_OVER_M,
}


def case_for(cfg: RunConfig) -> cf.Case | None:
    cid = _CASES.get((cfg.kernel, cfg.ic))
    if cid is None:
        return None
    return cf.Case(cid, cfg.alpha if cid is cf.CaseId.FRAG_POWER_LAW_EXP else None)


def _scenario(cfg: RunConfig, order: int | None = None) -> core.Scenario:
    try:
        return core.Scenario(build_kernel(cfg), build_ic(cfg), build_grid(cfg), cfg.times,
                             cfg.order if order is None else order)
    except (ValueError, core.GridError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output


def _fmt(x: float) -> str:
    return format(float(x), ".17e")


def write_csv(path: Path, header: str, columns: Sequence[np.ndarray]) -> None:
    cols = [np.asarray(c, float) for c in columns]
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _tname(t: float) -> str:
    return format(t, "g").replace(".", "p").replace("-", "m").replace("+", "")


def _rel(a, ref):
    a, ref = np.asarray(a), np.asarray(ref)
    with np.errstate(all="ignore"):
        out = np.abs(a - ref) / np.abs(ref)
    return np.where(ref == 0, np.abs(a - ref), out)


def _sup_rel(a, ref) -> float:
    return float(np.max(np.abs(a - ref)) / max(np.max(np.abs(ref)), 1e-300))


# ---------------------------------------------------------------------------
# commands


def _moments(fld: core.DistributionField) -> dict:
    return {"M0": fld.moment(0), "M1": fld.moment(1)}


def cmd_solve(cfg: RunConfig, out: Path, summary: dict) -> None:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", engine.ConvergenceWarning)
        state = engine.build_series(_scenario(cfg))
    summary["warnings"] += [str(w.message) for w in caught]
    summary["term_first_moments"] = state.first_moments
    for t in cfg.times:
        fld = engine.evaluate_series(state, t)
        write_csv(out / f"density_t{_tname(t)}.csv", HEADERS["density"], [fld.grid.points, fld.regular])
        summary["moments"][format(t, "g")] = {**_moments(fld), "atoms": [list(a) for a in fld.atoms]}


def cmd_compare(cfg: RunConfig, out: Path, summary: dict) -> None:
    case = case_for(cfg)
    if case is None:
        raise ConfigError(f"no exact solution registered for kernel={cfg.kernel}, ic={cfg.ic}")
    scen = _scenario(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", engine.ConvergenceWarning)
        state = engine.build_series(scen)
    summary["warnings"] += [str(w.message) for w in caught]
    traj = oracle.solve_direct(scen, max(cfg.times), cfg.tol)
    grid = scen.grid
    table = []
    for t in cfg.times:
        hpm = engine.evaluate_series(state, t)
        ref = cf.reference_solution(case, t, grid.points)
        orc = traj.at(t)
        write_csv(out / f"compare_t{_tname(t)}.csv", HEADERS["compare"],
                  [grid.points, hpm.regular, ref, orc.regular, _rel(hpm.regular, ref), _rel(orc.regular, ref)])
        summary["moments"][format(t, "g")] = {"hpm": _moments(hpm), "oracle": _moments(orc)}
        table.append({"t": t, "sup_rel_err_hpm": _sup_rel(hpm.regular, ref),
                      "sup_rel_err_oracle": _sup_rel(orc.regular, ref)})
    summary["error_table"] = table


def cmd_truncation(cfg: RunConfig, out: Path, summary: dict) -> None:
    case = case_for(cfg)
    grid = build_grid(cfg)
    t = cfg.times[-1]
    if case is not None:
        study = diagnostics.truncation_study(case, t, TRUNCATION_ORDERS, cfg.rel_tol, grid)
    else:
        order = max(cfg.order, max(TRUNCATION_ORDERS))
        state = engine.build_series(_scenario(cfg, order))
        study = diagnostics.truncation_study(state, t, TRUNCATION_ORDERS, cfg.rel_tol)
    write_csv(out / "truncation.csv", HEADERS["truncation"],
              [study.m, study.full] + [study.truncated[n] for n in TRUNCATION_ORDERS])
    summary["m_max_table"] = {str(n): {"m_max": study.frontier[n], "decades": study.decades[n]}
                              for n in TRUNCATION_ORDERS}
    if cfg.kernel == "power_law":
        write_csv(out / "fragments.csv", HEADERS["fragments"],
                  [grid.points, diagnostics.fragment_distribution(cfg.alpha, 1.0, grid.points)])


def cmd_scaling(cfg: RunConfig, out: Path, summary: dict) -> None:
    if cfg.kernel != "power_law" or cfg.ic != "exponential":
        raise ConfigError("scaling is defined for kernel=power_law with ic=exponential")
    z = np.linspace(0.1, 8.0, cfg.grid_count)
    times = [t for t in cfg.times if t > 0]
    rep = diagnostics.scaling_report(cfg.alpha, times, z)
    for t, vals in zip(rep.times, rep.transformed):
        write_csv(out / f"scaling_t{_tname(t)}.csv", HEADERS["scaling"], [z, rep.target, vals])
    summary["scaling"] = {"times": rep.times, "deviations": rep.deviations,
                          "final_deviation": rep.final_deviation, "monotone": rep.monotone}


def cmd_oracle(cfg: RunConfig, out: Path, summary: dict) -> None:
    scen = _scenario(cfg, 0)
    traj = oracle.solve_direct(scen, max(cfg.times), cfg.tol)
    for t in cfg.times:
        fld = traj.at(t)
        write_csv(out / f"oracle_t{_tname(t)}.csv", HEADERS["density"], [fld.grid.points, fld.regular])
        summary["moments"][format(t, "g")] = {**_moments(fld), "atoms": [list(a) for a in fld.atoms]}


def cmd_terms(cfg: RunConfig, out: Path, summary: dict) -> None:
    case = case_for(cfg)
    if case is None:
        raise ConfigError(f"no closed-form terms for kernel={cfg.kernel}, ic={cfg.ic}")
    top = min(cfg.order, case.max_order)
    payload = {str(k): json.loads(cf.terms_to_json(cf.hpm_term(case, k))) for k in range(top + 1)}
    write_json(out / "terms.json", {"case": case.label(), "terms": payload})
    if top < cfg.order:
        summary["warnings"].append(f"{case.label()} has closed-form terms only up to order {top}")


DISPATCH = {
    "solve": cmd_solve, "compare": cmd_compare, "truncation": cmd_truncation,
    "scaling": cmd_scaling, "oracle": cmd_oracle, "terms": cmd_terms,
}


def run(cfg: RunConfig) -> int:
    """Execute one configuration; returns the exit status."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config": dict(sorted(cfg.raw.items())), "moments": {}, "warnings": []}
    try:
        DISPATCH[cfg.command](cfg, out, summary)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return 2
    except HPMError as exc:
        logger.error("numerical failure: %s", exc)
        summary["error"] = str(exc)
        write_json(out / "summary.json", summary)
        return 1
    write_json(out / "summary.json", summary)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hpmpbe", description=__doc__.split("\n\n")[0])
    parser.add_argument("config", help="key = value run file")
    parser.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text)
        if args.set:
            raw = dict(cfg.raw)
            for item in args.set:
                if "=" not in item:
                    raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
                k, v = item.split("=", 1)
                raw[k.strip()] = v.strip()
            cfg = config_from_mapping(raw)
    except OSError as exc:
        logger.error("cannot read config: %s", exc)
        return 2
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
