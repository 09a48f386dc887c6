"""Command-line front end.

    qcdist <command> --config <path> [--out <path>] [--format json|csv] [--seed N]

Commands: distortion, meb, tukia, flow, certify. Configurations are JSON
documents validated against per-command schemas (unknown keys rejected).
Runs are deterministic given (config, seed): result files are byte-identical
across re-runs. Exit status: 0 all requested certificates pass, 1 a
certificate failed, 2 schema violation, 3 numerical fault.

Serialized floats carry 17 significant digits; non-finite values appear as
the strings "inf", "-inf", "nan". Wall-clock timing goes to stdout only so
files stay reproducible.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import flow as flow_mod
from . import groups as groups_mod
from . import manifold, pullback
from .charts import ChartMap
from .errors import ConfigError, QcdistError
from .fields import METRIC_KINDS, MetricField, VectorField
from .manifold import SolverConfig
from .sampling import Box, random_spd_batch
from .tensor import distortion_k2_batch, whitened_eigenvalues_batch

COMMANDS = ("distortion", "meb", "tukia", "flow", "certify")


@dataclass
class ResultBundle:
    command: str
    config: dict
    seed: int
    record_fields: list[str]
    records: list[dict] = field(default_factory=list)
    certificates: list[dict] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.certificates)


# -- config parsing ------------------------------------------------------------


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _check_keys(obj: dict, allowed: set, required: set, where: str):
    _require(isinstance(obj, dict), f"{where}: expected an object")
    unknown = set(obj) - allowed
    _require(not unknown, f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    _require(not missing, f"{where}: missing keys {sorted(missing)}")


def _parse_box(obj, where: str) -> Box:
    _check_keys(obj, {"lo", "hi"}, {"lo", "hi"}, where)
    try:
        return Box(lo=np.asarray(obj["lo"], dtype=float), hi=np.asarray(obj["hi"], dtype=float))
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_metric(obj, where: str) -> MetricField:
    _check_keys(obj, {"kind", "n", "params", "domain"}, {"kind", "n"}, where)
    _require(obj["kind"] in METRIC_KINDS, f"{where}: unknown metric kind '{obj['kind']}'")
    domain = _parse_box(obj["domain"], f"{where}.domain") if "domain" in obj else None
    try:
        return MetricField(obj["kind"], int(obj["n"]), obj.get("params"), domain)
    except QcdistError:
        raise
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_chart(obj, where: str) -> ChartMap:
    allowed = {"kind", "n", "params", "source_box", "target_box", "parts", "map", "inverse"}
    _check_keys(obj, allowed, {"kind"}, where)
    kind = obj["kind"]
    src = _parse_box(obj["source_box"], f"{where}.source_box") if "source_box" in obj else None
    tgt = _parse_box(obj["target_box"], f"{where}.target_box") if "target_box" in obj else None
    params = obj.get("params", {})
    try:
        if kind == "identity":
            _require(src is not None, f"{where}: identity chart needs a source_box")
            return ChartMap.identity(int(obj["n"]), src)
        if kind == "linear":
            return ChartMap.linear(np.asarray(params["matrix"], dtype=float), src, tgt)
        if kind == "translation":
            return ChartMap.translation(np.asarray(params["offset"], dtype=float), src, tgt)
        if kind == "mobius_ball":
            return ChartMap.mobius_ball(np.asarray(params["a"], dtype=float), src)
        if kind == "radial_stretch":
            return ChartMap.radial_stretch(float(params["eps"]), int(obj["n"]), src)
        if kind == "composition":
            parts = [
                _parse_chart(p, f"{where}.parts[{i}]") for i, p in enumerate(obj["parts"])
            ]
            return ChartMap.composition(parts, source_box=src)
        if kind == "declared_inverse":
            fwd = _parse_chart(obj["map"], f"{where}.map")
            inv = _parse_chart(obj["inverse"], f"{where}.inverse")
            return ChartMap.declared_inverse(fwd, inv)
    except QcdistError:
        raise
    except KeyError as exc:
        raise ConfigError(f"{where}: missing chart parameter {exc}") from exc
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown chart kind '{kind}'")


def _parse_vector_field(obj, where: str) -> VectorField:
    _check_keys(obj, {"kind", "n", "params", "domain"}, {"kind", "n"}, where)
    domain = _parse_box(obj["domain"], f"{where}.domain") if "domain" in obj else None
    try:
        return VectorField(obj["kind"], int(obj["n"]), obj.get("params"), domain)
    except QcdistError:
        raise
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_solver(obj, where: str) -> SolverConfig:
    if obj is None:
        return SolverConfig()
    _check_keys(obj, {"tol", "max_iter", "bc_steps"}, set(), where)
    return SolverConfig(
        tol=float(obj.get("tol", 1e-9)),
        max_iter=int(obj.get("max_iter", 100_000)),
        bc_steps=int(obj.get("bc_steps", 8)),
    )


def _parse_grid(obj, where: str) -> tuple[Box, list[int]]:
    _check_keys(obj, {"box", "resolution"}, {"box", "resolution"}, where)
    box = _parse_box(obj["box"], f"{where}.box")
    res = obj["resolution"]
    _require(
        isinstance(res, list) and all(isinstance(r, int) and r >= 0 for r in res),
        f"{where}.resolution: expected a list of nonnegative integers",
    )
    _require(len(res) == box.n, f"{where}.resolution: length must match the box dimension")
    return box, res


def validate_config(cfg: dict) -> dict:
    """Validate a raw config document; returns a normalized copy."""
    _require(isinstance(cfg, dict), "config must be a JSON object")
    _require("command" in cfg, "config needs a 'command'")
    cmd = cfg["command"]
    _require(cmd in COMMANDS, f"unknown command '{cmd}'")
    common = {"command", "seed", "output", "certificates"}
    schemas = {
        "distortion": common | {"metric_g", "metric_h", "map", "grid", "k_bound"},
        "meb": common | {"points", "solver"},
        "tukia": common | {"metric", "group", "grid", "solver"},
        "flow": common | {"metric", "field", "t_max", "steps", "sample"},
        "certify": common | {"trials", "dims", "log_spread"},
    }
    required = {
        "distortion": {"command", "metric_g", "metric_h", "map", "grid"},
        "meb": {"command", "points"},
        "tukia": {"command", "metric", "group", "grid"},
        "flow": {"command", "metric", "field", "t_max", "sample"},
        "certify": {"command"},
    }
    _check_keys(cfg, schemas[cmd], required[cmd], "config")
    seed = cfg.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer")
    certs = cfg.get("certificates")
    if certs is not None:
        _require(
            isinstance(certs, list) and all(isinstance(c, str) for c in certs),
            "certificates must be a list of names",
        )
    if cmd == "distortion":
        _parse_metric(cfg["metric_g"], "metric_g")
        _parse_metric(cfg["metric_h"], "metric_h")
        _parse_chart(cfg["map"], "map")
        _parse_grid(cfg["grid"], "grid")
    elif cmd == "meb":
        _require(
            isinstance(cfg["points"], list) and cfg["points"], "points must be a nonempty list"
        )
        _parse_solver(cfg.get("solver"), "solver")
    elif cmd == "tukia":
        _parse_metric(cfg["metric"], "metric")
        grp = cfg["group"]
        _check_keys(grp, {"elements", "k_bound"}, {"elements", "k_bound"}, "group")
        _require(isinstance(grp["elements"], list) and grp["elements"], "group.elements empty")
        for i, e in enumerate(grp["elements"]):
            _parse_chart(e, f"group.elements[{i}]")
        _parse_grid(cfg["grid"], "grid")
        _parse_solver(cfg.get("solver"), "solver")
    elif cmd == "flow":
        _parse_metric(cfg["metric"], "metric")
        _parse_vector_field(cfg["field"], "field")
        steps = cfg.get("steps", 1000)
        _require(isinstance(steps, int) and steps >= 1, "steps must be >= 1")
        sample = cfg["sample"]
        _check_keys(sample, {"box", "count"}, {"box"}, "sample")
        _parse_box(sample["box"], "sample.box")
        count = sample.get("count", 512)
        _require(isinstance(count, int) and count >= 1, "sample.count >= 1")
    elif cmd == "certify":
        trials = cfg.get("trials", 10000)
        _require(isinstance(trials, int) and trials >= 1, "trials must be a positive integer")
        dims = cfg.get("dims", [2, 3, 4])
        _require(
            isinstance(dims, list) and all(isinstance(d, int) and 2 <= d <= 8 for d in dims),
            "dims must be a list of integers in [2, 8]",
        )
    out = dict(cfg)
    out["seed"] = seed
    return out


# -- command implementations ---------------------------------------------------


def _default_certs(cmd: str) -> list[str]:
    return {
        "distortion": ["k2_floor", "ratio_bound"],
        "meb": ["residual", "converged"],
        "tukia": ["orbit_diameter", "unit_determinant", "center_equivariance", "beltrami_residual"],
        "flow": ["k_at_zero", "gronwall"],
        "certify": ["submultiplicativity", "inverse_bound", "ratio_bound", "am_gm_floor"],
    }[cmd]


def _run_distortion(cfg: dict, bundle: ResultBundle):
    g = _parse_metric(cfg["metric_g"], "metric_g")
    h = _parse_metric(cfg["metric_h"], "metric_h")
    chart = _parse_chart(cfg["map"], "map")
    box, res = _parse_grid(cfg["grid"], "grid")
    nodes, _ = box.midpoint_grid(res)
    n = g.n
    bundle.record_fields = [f"p{i}" for i in range(n)] + [
        "k_squared",
        "jac_sign",
        "riem_jacobian",
    ] + [f"lambda{i}" for i in range(n)]
    k2_max = 1.0
    ratio_ok = True
    floor_ok = True
    for p in nodes:
        rep = pullback.map_distortion(chart, g, h, p)
        row = {f"p{i}": float(p[i]) for i in range(n)}
        row["k_squared"] = rep.k_squared
        row["jac_sign"] = rep.jac_sign
        row["riem_jacobian"] = rep.riem_jacobian
        for i in range(n):
            row[f"lambda{i}"] = float(rep.eigenvalues[i])
        bundle.records.append(row)
        if rep.is_finite:
            k2_max = max(k2_max, rep.k_squared)
            floor_ok &= rep.k_squared >= 1.0 - 1e-12
            ratio_ok &= rep.certificates.get("ratio_bound", False)
        else:
            ratio_ok = False
    for name in cfg.get("certificates") or _default_certs("distortion"):
        if name == "k2_floor":
            bundle.certificates.append(
                {"name": name, "passed": bool(floor_ok), "worst": k2_max, "samples": len(nodes)}
            )
        elif name == "ratio_bound":
            bundle.certificates.append(
                {"name": name, "passed": bool(ratio_ok), "worst": k2_max, "samples": len(nodes)}
            )
        elif name == "k_bound":
            kb = float(cfg.get("k_bound", math.inf))
            bundle.certificates.append(
                {
                    "name": name,
                    "passed": bool(k2_max <= kb**2 * (1 + 1e-9)),
                    "worst": k2_max,
                    "samples": len(nodes),
                }
            )
        else:
            raise ConfigError(f"unknown certificate '{name}' for distortion")


def _run_meb(cfg: dict, bundle: ResultBundle):
    pts = [np.asarray(p, dtype=float) for p in cfg["points"]]
    solver = _parse_solver(cfg.get("solver"), "solver")
    result = manifold.minimal_enclosing_ball(pts, solver)
    n = pts[0].shape[0]
    bundle.record_fields = (
        ["radius", "iterations", "converged", "residual"]
        + [f"c{i}{j}" for i in range(n) for j in range(n)]
    )
    row = {
        "radius": result.radius,
        "iterations": result.iterations,
        "converged": int(result.converged),
        "residual": result.residual,
    }
    for i in range(n):
        for j in range(n):
            row[f"c{i}{j}"] = float(result.center[i, j])
    bundle.records.append(row)
    for name in cfg.get("certificates") or _default_certs("meb"):
        if name == "residual":
            bundle.certificates.append(
                {
                    "name": name,
                    "passed": bool(abs(result.residual) <= 10 * solver.tol),
                    "worst": abs(result.residual),
                    "samples": len(pts),
                }
            )
        elif name == "converged":
            bundle.certificates.append(
                {
                    "name": name,
                    "passed": bool(result.converged),
                    "worst": float(result.iterations),
                    "samples": len(pts),
                }
            )
        else:
            raise ConfigError(f"unknown certificate '{name}' for meb")


def _run_tukia(cfg: dict, bundle: ResultBundle):
    g = _parse_metric(cfg["metric"], "metric")
    elements = [
        _parse_chart(e, f"group.elements[{i}]") for i, e in enumerate(cfg["group"]["elements"])
    ]
    box, res = _parse_grid(cfg["grid"], "grid")
    nodes, _ = box.midpoint_grid(res)
    solver = _parse_solver(cfg.get("solver"), "solver")
    check_pts = box.halton_points(128, pad=1e-3)
    group = groups_mod.QCGroup(elements, float(cfg["group"]["k_bound"]), g, check_pts)
    structure = groups_mod.solve_invariant_structure(group, g, nodes, solver)
    n = g.n
    bundle.record_fields = (
        [f"p{i}" for i in range(n)]
        + [f"h{i}{j}" for i in range(n) for j in range(n)]
        + ["radius", "max_residual", "max_beltrami", "skipped"]
    )
    resid = structure.residuals
    belt = structure.beltrami
    for b, p in enumerate(nodes):
        row = {f"p{i}": float(p[i]) for i in range(n)}
        for i in range(n):
            for j in range(n):
                row[f"h{i}{j}"] = float(structure.h_coord[b, i, j])
        row["radius"] = float(structure.radii[b])
        row["max_residual"] = float(np.nanmax(resid[b])) if not structure.skipped[b] else math.nan
        row["max_beltrami"] = float(np.nanmax(belt[b])) if not structure.skipped[b] else math.nan
        row["skipped"] = int(structure.skipped[b])
        bundle.records.append(row)
    budget = 10.0 * solver.tol
    used = int(np.sum(~structure.skipped))
    dets = np.linalg.det(structure.h_triv[~structure.skipped]) if used else np.array([1.0])
    for name in cfg.get("certificates") or _default_certs("tukia"):
        if name == "orbit_diameter":
            worst = structure.meta["max_orbit_diameter"]
            bound = structure.meta["diameter_bound"] * (1 + 1e-9)
            bundle.certificates.append(
                {"name": name, "passed": bool(worst <= bound), "worst": worst, "samples": used}
            )
        elif name == "unit_determinant":
            worst = float(np.max(np.abs(dets - 1.0)))
            bundle.certificates.append(
                {"name": name, "passed": bool(worst <= 1e-10), "worst": worst, "samples": used}
            )
        elif name == "center_equivariance":
            worst = structure.max_residual
            bundle.certificates.append(
                {"name": name, "passed": bool(worst <= budget), "worst": worst, "samples": used}
            )
        elif name == "beltrami_residual":
            worst = structure.max_beltrami
            bundle.certificates.append(
                {"name": name, "passed": bool(worst <= budget), "worst": worst, "samples": used}
            )
        else:
            raise ConfigError(f"unknown certificate '{name}' for tukia")


def _run_flow(cfg: dict, bundle: ResultBundle):
    g = _parse_metric(cfg["metric"], "metric")
    fld = _parse_vector_field(cfg["field"], "field")
    sample_box = _parse_box(cfg["sample"]["box"], "sample.box")
    pts = sample_box.halton_points(int(cfg["sample"].get("count", 512)))
    trace = flow_mod.integrate_flow(
        fld, g, float(cfg["t_max"]), int(cfg.get("steps", 1000)), pts
    )
    bundle.record_fields = ["t", "K", "bound", "residual"]
    for i, t in enumerate(trace.times):
        bundle.records.append(
            {
                "t": float(t),
                "K": float(trace.k_of_t[i]),
                "bound": float(trace.bound_of_t[i]),
                "residual": float(trace.kdot_residuals[i]),
            }
        )
    for name in cfg.get("certificates") or _default_certs("flow"):
        if name == "k_at_zero":
            worst = abs(float(trace.k_of_t[0]) - 1.0)
            bundle.certificates.append(
                {
                    "name": name,
                    "passed": bool(worst <= 1e-9),
                    "worst": worst,
                    "samples": trace.sample_count,
                }
            )
        elif name == "gronwall":
            margin = float(np.max(trace.k_of_t / trace.bound_of_t))
            bundle.certificates.append(
                {
                    "name": name,
                    "passed": trace.gronwall_ok,
                    "worst": margin,
                    "samples": trace.sample_count,
                }
            )
        else:
            raise ConfigError(f"unknown certificate '{name}' for flow")


def _run_certify(cfg: dict, bundle: ResultBundle):
    trials = int(cfg.get("trials", 10000))
    dims = cfg.get("dims", [2, 3, 4])
    spread = float(cfg.get("log_spread", 2.0))
    rng = np.random.default_rng(bundle.seed)
    bundle.record_fields = ["n", "certificate", "violations", "worst", "trials"]
    results = {}
    for n in dims:
        g = random_spd_batch(rng, trials, n, spread)
        h = random_spd_batch(rng, trials, n, spread)
        k = random_spd_batch(rng, trials, n, spread)
        k2_gh = distortion_k2_batch(g, h)
        k2_hk = distortion_k2_batch(h, k)
        k2_gk = distortion_k2_batch(g, k)
        k2_hg = distortion_k2_batch(h, g)
        lam = whitened_eigenvalues_batch(g, h)
        nn = float(n) ** n
        sub_ratio = k2_gk / (nn * k2_gh * k2_hk)
        inv_ratio = k2_gh / k2_hg ** (n - 1)
        rat_ratio = (lam[:, -1] / lam[:, 0]) / (nn * k2_gh)
        floor = k2_gh
        results[(n, "submultiplicativity")] = sub_ratio
        results[(n, "inverse_bound")] = inv_ratio
        results[(n, "ratio_bound")] = rat_ratio
        results[(n, "am_gm_floor")] = floor
    names = cfg.get("certificates") or _default_certs("certify")
    for name in names:
        worst_all = 0.0
        passed = True
        for n in dims:
            vals = results.get((n, name))
            if vals is None:
                raise ConfigError(f"unknown certificate '{name}' for certify")
            if name == "am_gm_floor":
                viol = int(np.sum(vals < 1.0 - 1e-12))
                worst = float(np.min(vals))
            else:
                viol = int(np.sum(vals > 1.0 + 1e-9))
                worst = float(np.max(vals))
            bundle.records.append(
                {"n": n, "certificate": name, "violations": viol, "worst": worst, "trials": trials}
            )
            passed &= viol == 0
            worst_all = max(worst_all, abs(worst))
        bundle.certificates.append(
            {
                "name": name,
                "passed": bool(passed),
                "worst": worst_all,
                "samples": trials * len(dims),
            }
        )


def run(cfg: dict, seed: int | None = None) -> ResultBundle:
    """Validate and execute a configuration; returns the result bundle."""
    cfg = validate_config(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    bundle = ResultBundle(
        command=cfg["command"], config=cfg, seed=cfg["seed"], record_fields=[]
    )
    t0 = time.perf_counter()
    runner = {
        "distortion": _run_distortion,
        "meb": _run_meb,
        "tukia": _run_tukia,
        "flow": _run_flow,
        "certify": _run_certify,
    }[cfg["command"]]
    runner(cfg, bundle)
    bundle.timing["total_s"] = time.perf_counter() - t0
    return bundle


# -- serialization ---------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"cannot serialize {type(value)}")


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return ""
        return format(x, ".17g")
    return str(value)


def emit(bundle: ResultBundle, path: str, fmt: str = "json") -> None:
    """Write the bundle to disk; stable ordering, reproducible bytes.

    Timing is deliberately not serialized so identical (config, seed) runs
    produce identical files.
    """
    if fmt == "json":
        doc = {
            "command": bundle.command,
            "seed": bundle.seed,
            "config": bundle.config,
            "record_fields": bundle.record_fields,
            "records": bundle.records,
            "certificates": bundle.certificates,
        }
        text = _fmt(doc) + "\n"
    elif fmt == "csv":
        lines = [",".join(bundle.record_fields)]
        for row in bundle.records:
            lines.append(",".join(_csv_cell(row[k]) for k in bundle.record_fields))
        text = "\n".join(lines) + "\n"
    else:
        raise ConfigError(f"unknown output format '{fmt}'")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qcdist", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON configuration")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--format", default="json", choices=("json", "csv"))
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if isinstance(cfg, dict) and "command" not in cfg:
            cfg["command"] = args.command
        elif isinstance(cfg, dict) and cfg.get("command") != args.command:
            raise ConfigError(
                f"config command '{cfg.get('command')}' does not match '{args.command}'"
            )
        bundle = run(cfg, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QcdistError as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 3
    out = args.out or bundle.config.get("output")
    if out:
        emit(bundle, out, args.format)
    for cert in bundle.certificates:
        status = "PASS" if cert["passed"] else "FAIL"
        print(
            f"[{status}] {cert['name']}: worst={cert['worst']:.6g} samples={cert['samples']}"
        )
    print(f"elapsed: {bundle.timing['total_s']:.3f}s")
    return 0 if bundle.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
