"""Command-line entry point: predict, simulate, verify, sweep, depth.

Exit codes: 0 ok, 2 config error, 3 verification failure, 4 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict

import numpy as np

from . import __version__
from . import costmodel as cm
from . import exact as ex
from . import schedule as sch
from .search import EXACT, SAMPLING, SearchSpec, run_search, verify_projection_norms
from .statevector import DEFAULT_MAX_QUBITS, ResourceCapError

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_CAP = 0, 2, 3, 4

DEFAULTS = {
    "partition": None, "n": None, "stages": None, "target": "all-ones", "locals": None,
    "iterates": None, "shots": 1000, "seed": 0, "mode": "sampling", "boost": "none",
    "format": "json", "out": None, "max_qubits": DEFAULT_MAX_QUBITS,
    # verify
    "fuzz": 100, "trials": 50, "perturb_gamma": 0.0,
    # sweep / depth
    "ns": "20:50", "stage_list": "2,3,4", "scenarios": "S1,S2,S3", "multipliers": "1,5,10",
}

COMMON_KEYS = ("partition", "n", "stages", "target", "locals", "iterates", "shots", "seed",
               "mode", "boost", "format", "out", "max_qubits")
COMMAND_KEYS = {"verify": ("fuzz", "trials", "perturb_gamma"),
                "sweep": ("ns", "stage_list", "scenarios", "multipliers"),
                "depth": ("multipliers",)}

MODE_ALIASES = {"sampling": SAMPLING, "exact": EXACT, "exact-expectation": EXACT}
BOOST_ALIASES = {"none": sch.BOOST_NONE, "auto": sch.BOOST_AFTER_FIRST,
                 sch.BOOST_AFTER_FIRST: sch.BOOST_AFTER_FIRST}


class ConfigError(ValueError):
    pass


# -- config ----------------------------------------------------------------

def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from e


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from e


def _range(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    if ":" in str(text):
        lo, hi = (int(v) for v in str(text).split(":"))
        return list(range(lo, hi + 1))
    return _int_list(text)


def resolve_config(args: argparse.Namespace) -> tuple[dict, str | None]:
    """Defaults, then the --config file, then explicitly given flags.

    Returns the resolved config (embedded in reports) and the output path.
    """
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        if "boost_policy" in loaded and "boost" not in loaded:
            loaded["boost"] = loaded.pop("boost_policy")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg = _normalize(cfg)
    # the output path is left out so reports do not depend on where they are written
    keep = tuple(k for k in COMMON_KEYS if k != "out") + COMMAND_KEYS.get(args.command, ())
    return {"command": args.command, **{k: cfg[k] for k in keep}}, cfg["out"]


def _normalize(cfg: dict) -> dict:
    if cfg["mode"] not in MODE_ALIASES:
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    cfg["mode"] = MODE_ALIASES[cfg["mode"]]
    if cfg["boost"] not in BOOST_ALIASES:
        raise ConfigError(f"unknown boost policy {cfg['boost']!r}")
    cfg["boost"] = BOOST_ALIASES[cfg["boost"]]
    if cfg["format"] not in ("json", "csv"):
        raise ConfigError(f"unknown format {cfg['format']!r}")
    part = cfg["partition"]
    if part is not None:
        cfg["partition"] = _int_list(part)
        if cfg["n"] is not None and sum(cfg["partition"]) != int(cfg["n"]):
            raise ConfigError(f"partition {cfg['partition']} does not sum to n={cfg['n']}")
    elif cfg["n"] is not None:
        stages = int(cfg["stages"] or 1)
        if not 1 <= stages <= int(cfg["n"]):
            raise ConfigError(f"cannot split {cfg['n']} qubits into {stages} stages")
        cfg["partition"] = sch.near_equal_partition(int(cfg["n"]), stages)
    if cfg["partition"] is not None:
        cfg["n"] = sum(cfg["partition"])
        target = cfg["target"]
        if target != "all-ones" and (len(target) != cfg["n"] or set(target) - {"0", "1"}):
            raise ConfigError(f"target must be all-ones or {cfg['n']} bits, got {target!r}")
    for key in ("shots", "seed", "max_qubits", "fuzz", "trials"):
        cfg[key] = int(cfg[key])
    cfg["perturb_gamma"] = float(cfg["perturb_gamma"])
    return cfg


def build_spec(cfg: dict, max_qubits: int | None = None) -> SearchSpec:
    if cfg["partition"] is None:
        raise ConfigError("a partition (or n) is required")
    d = {"partition": cfg["partition"], "target": cfg["target"], "locals": cfg["locals"],
         "iterates": cfg["iterates"], "shots": cfg["shots"], "seed": cfg["seed"],
         "mode": cfg["mode"], "boost_policy": cfg["boost"]}
    return SearchSpec.from_dict(d, max_qubits=cfg["max_qubits"] if max_qubits is None else max_qubits)


# -- output ----------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def envelope(cfg: dict, result) -> str:
    body = {"tool": "partialsearch", "version": __version__, "config": cfg, "result": result}
    return json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n"


def rows_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write_output(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(out))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- commands --------------------------------------------------------------

def cmd_predict(cfg: dict) -> tuple[str, int]:
    spec = build_spec(cfg, max_qubits=max(cfg["n"] or 0, cfg["max_qubits"]))
    plan = spec.plan()
    if cfg["format"] == "csv":
        rows = [{"round": j + 1, "stages": len(r.iterates),
                 "iterates": ";".join(map(str, r.iterates)), "gamma": r.gammas[-1],
                 "success": r.success, "prefix_success": plan.prefix_success[j],
                 "oracle_calls": r.oracle_calls} for j, r in enumerate(plan.rounds)]
        cols = ["round", "stages", "iterates", "gamma", "success", "prefix_success", "oracle_calls"]
        return rows_csv(rows, cols), EXIT_OK
    return envelope(cfg, plan.to_dict()), EXIT_OK


def cmd_simulate(cfg: dict) -> tuple[str, int]:
    spec = build_spec(cfg)
    report = run_search(spec)
    if cfg["format"] == "csv":
        return report.to_csv(), EXIT_OK
    result = report.to_dict()
    result["predicted_success"] = spec.plan().overall_success
    return envelope(cfg, result), EXIT_OK


DEFAULT_VERIFY_CASES = [
    {"partition": [1, 1], "target": "11", "iterates": [1, 1]},
    {"partition": [2, 2], "target": "1011", "iterates": [1, 2]},
    {"partition": [2, 1, 1], "target": "0110", "iterates": [2, 1, 1]},
    {"partition": [1, 1, 2], "target": "1010", "iterates": [1, 1, 1]},
    {"partition": [3, 3], "target": "all-ones", "iterates": None},
]


def run_verify_suite(fuzz: int = 100, trials: int = 50, seed: int = 0,
                     perturb_gamma: float = 0.0) -> dict:
    """Spectrum, block, projection-norm and cross-validation suites."""
    rng = np.random.default_rng(seed)
    suites: dict[str, dict] = {}

    checks = []
    for case in DEFAULT_VERIFY_CASES:
        sizes = case["partition"]
        spec = SearchSpec.from_dict({"partition": sizes, "target": case["target"]})
        if case["partition"] == [1, 1, 2]:
            spec = SearchSpec(spec.partition, spec.target,
                              [ex.random_local(rng, s) for s in sizes])
        its = case["iterates"] or spec.round_iterates()[0]
        for i in range(2, len(sizes) + 1):
            c = ex.check_stage(spec, i, its, perturb_gamma)
            checks.append({"partition": sizes, **c.to_dict()})
    suites["spectrum"] = {"passed": all(c["passed"] for c in checks), "checks": checks}

    fz = ex.degeneracy_fuzz(fuzz, rng, perturb_gamma)
    suites["fuzz"] = {"passed": fz.passed, "instances": fz.instances,
                      "stage_checks": len(fz.checks), "max_spectrum_dev": fz.max_spectrum_dev,
                      "failures": fz.failures[:10], "failure_count": len(fz.failures)}

    proj = []
    for case in DEFAULT_VERIFY_CASES[:4]:
        spec = SearchSpec.from_dict({"partition": case["partition"], "target": case["target"]})
        for r in verify_projection_norms(spec, case["iterates"], trials, rng):
            proj.append({"partition": case["partition"], **asdict(r)})
    suites["projection"] = {"passed": all(r["max_deviation"] <= 1e-9 for r in proj), "reports": proj}

    cross = []
    for sizes in ([1, 1], [2, 2], [3, 3], [2, 1, 1], [3, 3, 2], [2, 2, 2, 2], [4, 4]):
        c = ex.cross_validate(SearchSpec.uniform(sizes))
        cross.append({**asdict(c), "max_gap": c.max_gap})
    suites["cross_validation"] = {"passed": all(c["max_gap"] <= 1e-10 for c in cross), "checks": cross}

    return {"passed": all(s["passed"] for s in suites.values()),
            "perturb_gamma": perturb_gamma, "suites": suites}


def cmd_verify(cfg: dict) -> tuple[str, int]:
    result = run_verify_suite(cfg["fuzz"], cfg["trials"], cfg["seed"], cfg["perturb_gamma"])
    code = EXIT_OK if result["passed"] else EXIT_VERIFY
    if cfg["format"] == "csv":
        rows = [{"suite": k, "passed": v["passed"]} for k, v in result["suites"].items()]
        return rows_csv(rows, ["suite", "passed"]), code
    return envelope(cfg, result), code


def cmd_sweep(cfg: dict) -> tuple[str, int]:
    scenarios = [s.strip() for s in str(cfg["scenarios"]).split(",")] \
        if not isinstance(cfg["scenarios"], list) else cfg["scenarios"]
    bad = set(scenarios) - set(cm.SCENARIOS)
    if bad:
        raise ConfigError(f"unknown scenarios {sorted(bad)}")
    rows = cm.sweep(_range(cfg["ns"]), _int_list(cfg["stage_list"]), scenarios,
                    _float_list(cfg["multipliers"]))
    if cfg["format"] == "csv":
        return cm.rows_to_csv(rows), EXIT_OK
    return envelope({**cfg, "depth_model": asdict(cm.DEFAULT_CONFIG)}, rows), EXIT_OK


def cmd_depth(cfg: dict) -> tuple[str, int]:
    if cfg["partition"] is None:
        raise ConfigError("a partition (or n) is required")
    mults = _float_list(cfg["multipliers"])
    reports = []
    for sc in cm.SCENARIOS:
        rep = cm.cost_report(cfg["partition"], sc, cfg["boost"])
        d = rep.to_dict()
        d["relative_depth"] = {repr(m): rep.relative_depth(m) for m in mults}
        d["diffusion_depth_ratio"] = rep.recursive_diffusion_depth / rep.grover_diffusion_depth
        reports.append(d)
    if cfg["format"] == "csv":
        rows = [{"scenario": r["scenario"], "recursive_calls": r["recursive_calls"],
                 "grover_calls": r["grover_calls"], "overhead": r["overhead"],
                 "diffusion_depth_ratio": r["diffusion_depth_ratio"],
                 "break_even": r["break_even"]} for r in reports]
        cols = ["scenario", "recursive_calls", "grover_calls", "overhead",
                "diffusion_depth_ratio", "break_even"]
        return rows_csv(rows, cols), EXIT_OK
    return envelope({**cfg, "depth_model": asdict(cm.DEFAULT_CONFIG)}, reports), EXIT_OK


COMMANDS = {"predict": cmd_predict, "simulate": cmd_simulate, "verify": cmd_verify,
            "sweep": cmd_sweep, "depth": cmd_depth}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with config keys; flags override it")
    common.add_argument("--partition", help="register sizes, outermost first, e.g. 6,6,6")
    common.add_argument("--n", type=int, help="total qubits (with --stages if no partition)")
    common.add_argument("--stages", type=int, help="number of near-equal stages")
    common.add_argument("--target", help='target bits, or "all-ones"')
    common.add_argument("--shots", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=["sampling", "exact", "exact-expectation"])
    common.add_argument("--boost", choices=["auto", "none"])
    common.add_argument("--out", help="output path (stdout if omitted)")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--max-qubits", dest="max_qubits", type=int)

    p = argparse.ArgumentParser(prog="partialsearch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("predict", parents=[common], help="analytic schedule and success")
    sub.add_parser("simulate", parents=[common], help="statevector run")
    v = sub.add_parser("verify", parents=[common], help="dense verification suites")
    v.add_argument("--fuzz", type=int, help="random instances for the degeneracy fuzz")
    v.add_argument("--trials", type=int, help="random lower-register states per stage")
    v.add_argument("--perturb-gamma", dest="perturb_gamma", type=float,
                   help="shift the predicted gamma (negative control)")
    for name, text in (("sweep", "cost-model grid"), ("depth", "cost model for one partition")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--ns", help="n values, lo:hi or comma list")
        s.add_argument("--stage-list", dest="stage_list", help="stage counts, e.g. 2,3,4")
        s.add_argument("--scenarios", help="subset of S1,S2,S3")
        s.add_argument("--multipliers", help="oracle depth multipliers, e.g. 1,5,10")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out = resolve_config(args)
        text, code = COMMANDS[cfg["command"]](cfg)
        write_output(text, out)
        return code
    except (ResourceCapError, ex.DenseCapError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except (ValueError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
