"""Command line front end: config parsing, dispatch, CSV/JSON artifacts.

Exit codes: 0 success, 1 a property verdict failed, 2 usage error, 3
numerical breakdown (shooting, Newton, or step-size failure).  Artifacts are
written atomically (temp file in the target directory, then rename), CSVs are
comma-separated UTF-8 with LF endings and a header row naming columns and
units.  Re-running with the same config, seed, and thread count reproduces
the artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import inspect
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .barriers import (ScaledBarrier, assemble_subsolution,
                       lemma_barrier_flow, static_barrier_w,
                       wk_difference_fit)
from .cones import ConeProfile
from .errors import (CertificationError, DomainError, GridError, NewtonError,
                     ParameterError, ResolutionError, ShootingError,
                     StepFailureError)
from .expander import evaluate_U, solve_expander_profile
from .experiments import SCENARIOS, bump
from .flow import SolverConfig, evolve
from .geometry import GridFunction, GridSpec

log = logging.getLogger("coneflow")

ENV_OUT = "CONEFLOW_OUT"

# defaults double as the config schema: keys and value types are checked
DEFAULTS = {
    "run": {"seed": 0, "threads": 0, "quick": False},
    "expander": {"n": 2, "beta": 1.0},
    "evolve": {"n": 2, "beta": 1.0, "bump_amp": 1.0, "bump_radius": 5.0,
               "r_max": 75.0, "nodes": 1501, "horizon": 10.0,
               "dt_max": 0.025, "snapshot_dt": 0.5,
               "boundary": "pin-to-expander"},
    "barrier": {"which": "all", "n": 3, "beta": 1.0, "alpha": 0.5,
                "m": 0.2, "delta": 0.1, "barrier_radius": 5.0},
    "verify": {"which": "all", "trials": 100},
    "experiment": {"name": "main-theorem"},
    "suite": {},
}


# ---------------------------------------------------------------------------
# artifact plumbing


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns, rows) -> None:
    """columns: (name, unit) pairs; rows: iterable of value tuples."""
    lines = [",".join(f"{name} [{unit}]" for name, unit in columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        return {f.name: getattr(v, f.name) for f in dataclasses.fields(v)}
    raise TypeError(f"not serializable: {type(v).__name__}")


def write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True,
                                   default=_jsonable) + "\n")


# ---------------------------------------------------------------------------
# configuration


def _coerce(key: str, default, raw: str):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ParameterError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ParameterError(f"{key}: expected {type(default).__name__}, "
                             f"got {raw!r}") from None
    return raw


def load_config(path: str | None) -> dict:
    """Merge an INI file over the defaults; unknown keys are usage errors."""
    cfg = {s: dict(v) for s, v in DEFAULTS.items()}
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ParameterError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in cfg:
            raise ParameterError(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            if key not in cfg[section]:
                raise ParameterError(f"unknown key {key!r} in [{section}]")
            cfg[section][key] = _coerce(f"[{section}] {key}",
                                        cfg[section][key], raw)
    return cfg


def print_config(cfg: dict, stream=None) -> None:
    stream = sys.stdout if stream is None else stream
    for section, values in cfg.items():
        print(f"[{section}]", file=stream)
        for key, val in values.items():
            print(f"{key} = {val}", file=stream)
        print(file=stream)


def _apply_sets(section: dict, pairs, label: str) -> None:
    for pair in pairs or ():
        if "=" not in pair:
            raise ParameterError(f"--set wants key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in section:
            raise ParameterError(f"unknown key {key!r} for {label} "
                                 f"(known: {', '.join(sorted(section))})")
        section[key] = _coerce(key, section[key], raw)


def _resolve_out(arg_out: str | None) -> str:
    out = arg_out or os.environ.get(ENV_OUT) or "results"
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ParameterError(f"output directory not writable: {out}")
    return out


# ---------------------------------------------------------------------------
# subcommand handlers (return the process exit code)


def _cmd_expander(cfg: dict, out: str) -> int:
    sec = cfg["expander"]
    k = ConeProfile.radial(sec["n"], sec["beta"])
    prof = solve_expander_profile(k)
    drift = 0.5 * (prof.phi - prof.rho * prof.phi_prime)
    write_csv(os.path.join(out, "expander_profile.csv"),
              [("rho", "1"), ("phi", "height"), ("phi_prime", "1"),
               ("drift", "height")],
              zip(prof.rho, prof.phi, prof.phi_prime, drift))
    report = {"n": prof.n, "beta": prof.beta, "a": prof.a,
              "nodes": int(prof.rho.size), "rho_max": prof.rho_max}
    report.update(prof.report)
    write_json(os.path.join(out, "expander_report.json"), report)
    log.info("expander profile: a = %.10f on %d nodes", prof.a, prof.rho.size)
    return 0


def _cmd_evolve(cfg: dict, out: str) -> int:
    sec = cfg["evolve"]
    k = ConeProfile.radial(sec["n"], sec["beta"])
    prof = solve_expander_profile(k)
    spec = GridSpec.uniform(sec["n"], 0.0, sec["r_max"], sec["nodes"])
    r = spec.nodes
    u0 = GridFunction(spec, k.beta * r
                      + sec["bump_amp"] * bump(r, 1.0, sec["bump_radius"]))
    solver = SolverConfig(dt_init=1e-3, dt_max=sec["dt_max"],
                          snapshot_dt=sec["snapshot_dt"],
                          boundary=sec["boundary"])
    run = evolve(u0, sec["horizon"], solver, cone=k, profile=prof)
    write_csv(os.path.join(out, "flow_trace.csv"),
              [("t", "time"), ("dt", "time"), ("sup_u_minus_k", "height"),
               ("sup_u_minus_U", "height"), ("min_H", "1/length"),
               ("max_H", "1/length")],
              zip(run.step_times, run.step_sizes, run.sup_u_minus_k,
                  run.sup_u_minus_U, run.min_H, run.max_H))
    t_end = float(run.times[-1])
    write_csv(os.path.join(out, "flow_final.csv"),
              [("r", "length"), ("u", "height"), ("U", "height")],
              zip(r, run.final().values,
                  evaluate_U(prof, r, max(t_end, 1e-12))))
    write_json(os.path.join(out, "flow_report.json"),
               {"steps": len(run.step_times),
                "snapshots": len(run.snapshots),
                "newton_iterations": int(np.sum(run.newton_iters)),
                "final_sup_u_minus_U": float(run.sup_u_minus_U[-1]),
                "final_time": t_end})
    return 0


def _cmd_barrier(cfg: dict, out: str) -> int:
    sec = cfg["barrier"]
    which = sec["which"]
    if which not in ("static", "lemma", "subsolution", "all"):
        raise ParameterError(f"unknown barrier kind {which!r}")
    k = ConeProfile.radial(sec["n"], sec["beta"])
    report: dict = {"n": sec["n"], "beta": sec["beta"]}
    verdicts = []

    lemma_res = None
    if which in ("static", "all"):
        sb = static_barrier_w(k, sec["alpha"])
        fit = wk_difference_fit(k, sec["alpha"])
        write_csv(os.path.join(out, "static_barrier.csv"),
                  [("r", "length"), ("w", "height"), ("H", "1/length")],
                  zip(sb.r, sb.w, sb.H))
        report["static"] = {"alpha": sec["alpha"], "r0": sb.r0,
                            "certified": sb.certified,
                            "gap_exponent": fit["fit"].exponent,
                            "predicted_exponent": fit["predicted_exponent"]}
        verdicts.append(sb.certified)
    if which in ("lemma", "subsolution", "all"):
        lemma_res = lemma_barrier_flow(k)
        write_csv(os.path.join(out, "lemma_barrier.csv"),
                  [("r", "length"), ("b", "height"), ("k_minus_b", "height")],
                  zip(lemma_res.path.spec.nodes, lemma_res.b_final.values,
                      lemma_res.k_values - lemma_res.b_final.values))
        report["lemma"] = {"min_gap": lemma_res.min_gap,
                           "H_min": lemma_res.H_min,
                           "r_cut": lemma_res.r_cut,
                           "deficit_exponent": lemma_res.deficit_fit.exponent,
                           "m1": lemma_res.m1, "R1": lemma_res.R1,
                           "passed": lemma_res.passed}
        if which != "subsolution":
            verdicts.append(bool(lemma_res.passed))
    if which in ("subsolution", "all"):
        if not lemma_res.passed:
            raise CertificationError("lemma barrier failed; cannot glue")
        prof = solve_expander_profile(k)
        scaled = ScaledBarrier.from_result(lemma_res, 1.0)
        sub = assemble_subsolution(prof, scaled, sec["m"], sec["delta"],
                                   sec["barrier_radius"])
        spec = GridSpec.uniform(sec["n"], 0.0, 0.8 * scaled.domain[1], 1001)
        res = sub.residual_report(spec, np.linspace(0.05, 1.0, 8))
        report["subsolution"] = res
        verdicts.append(bool(res["subsolution_ok"]))

    report["passed"] = all(verdicts)
    write_json(os.path.join(out, "barrier_report.json"), report)
    return 0 if report["passed"] else 1


def _cmd_verify(cfg: dict, out: str) -> int:
    from .acceptance import area_bv_bound, evolution_equations, psi_identity

    sec = cfg["verify"]
    which = sec["which"]
    if which not in ("psi", "evolution", "area", "all"):
        raise ParameterError(f"unknown verification {which!r}")
    quick = cfg["run"]["quick"]
    report = {}
    verdicts = []
    if which in ("psi", "all"):
        ok, detail = psi_identity(quick)
        report["psi_identity"] = {"passed": ok, "detail": detail}
        verdicts.append(ok)
    if which in ("evolution", "all"):
        ok, detail = evolution_equations(quick)
        report["evolution_equations"] = {"passed": ok, "detail": detail}
        verdicts.append(ok)
    if which in ("area", "all"):
        ok, detail = area_bv_bound(quick or sec["trials"] <= 25)
        report["area_bound"] = {"passed": ok, "detail": detail}
        verdicts.append(ok)
    report["passed"] = all(verdicts)
    write_json(os.path.join(out, "verify_report.json"), report)
    for name, entry in report.items():
        if isinstance(entry, dict):
            state = "pass" if entry["passed"] else "FAIL"
            print(f"{name}: {state} ({entry['detail']})")
    return 0 if report["passed"] else 1


_SCENARIO_RUNNERS = {"main-theorem": "run_main_theorem",
                     "one-sided": "run_one_sided",
                     "family-uniform": "run_family_uniform",
                     "subsolution": "subsolution_dominance_experiment"}


def _scenario_overrides(scenario, pairs) -> tuple:
    """Type-check key=value pairs against the runner's signature."""
    from . import experiments

    fn = getattr(experiments, _SCENARIO_RUNNERS[scenario.kind])
    schema = {name: p.default for name, p in
              inspect.signature(fn).parameters.items()
              if p.default is not inspect.Parameter.empty}
    merged = dict(scenario.overrides)
    for pair in pairs or ():
        if "=" not in pair:
            raise ParameterError(f"--set wants key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in schema:
            raise ParameterError(f"unknown parameter {key!r} for scenario "
                                 f"{scenario.name!r}")
        default = schema[key]
        merged[key] = (_coerce(key, default, raw) if default is not None
                       else float(raw))
    return tuple(merged.items())


def _experiment_summary(name: str, rep) -> dict:
    summary = {"scenario": name, "passed": bool(rep.passed)}
    if hasattr(rep, "sides"):
        summary["threshold"] = rep.threshold
        summary["sides"] = {str(s): {"t_flat": side.t_flat,
                                     "t_delta": side.t_delta,
                                     "upper_ok": bool(side.upper),
                                     "lower_ok": bool(side.lower)}
                            for s, side in rep.sides.items()}
    if hasattr(rep, "fit"):
        summary["decay_exponent"] = rep.fit.exponent
    if hasattr(rep, "t_uniform"):
        summary.update(t_uniform=rep.t_uniform,
                       sandwich_ok=rep.sandwich_ok, bound_ok=rep.bound_ok)
    if hasattr(rep, "dominance_margin"):
        summary.update(dominance_margin=rep.dominance_margin,
                       t_delta=rep.t_delta)
    return summary


def _experiment_trace(rep):
    if hasattr(rep, "sides"):
        ts = rep.sides[+1].trace_times
        return ([("t", "time"), ("sup_above", "height"),
                 ("sup_below", "height")],
                zip(ts, rep.sides[+1].trace, rep.sides[-1].trace))
    if hasattr(rep, "trace_times") and hasattr(rep, "fit"):
        return ([("t", "time"), ("sup_u_minus_U", "height")],
                zip(rep.trace_times, rep.trace))
    if hasattr(rep, "family_trace"):
        return ([("t", "time"), ("family_sup", "height"),
                 ("rail_sup", "height")],
                zip(rep.trace_times, rep.family_trace, rep.rail_trace))
    return None


def _cmd_experiment(cfg: dict, out: str, sets) -> int:
    name = cfg["experiment"]["name"]
    if name not in SCENARIOS:
        raise ParameterError(f"unknown scenario {name!r} "
                             f"(known: {', '.join(sorted(SCENARIOS))})")
    scenario = SCENARIOS[name]
    overrides = _scenario_overrides(scenario, sets)
    scenario = dataclasses.replace(scenario, seed=cfg["run"]["seed"],
                                   overrides=overrides)
    rep = scenario.run(quick=cfg["run"]["quick"])
    summary = _experiment_summary(name, rep)
    summary["claim"] = scenario.claim
    write_json(os.path.join(out, f"experiment_{name}.json"), summary)
    trace = _experiment_trace(rep)
    if trace is not None:
        write_csv(os.path.join(out, f"experiment_{name}_trace.csv"),
                  trace[0], trace[1])
    print(f"{name}: {'pass' if rep.passed else 'FAIL'} ({scenario.claim})")
    return 0 if rep.passed else 1


def _cmd_suite(cfg: dict, out: str) -> int:
    from .acceptance import run_acceptance

    report = run_acceptance(quick=cfg["run"]["quick"])
    write_csv(os.path.join(out, "acceptance.csv"),
              [("number", "index"), ("name", "text"), ("passed", "0/1"),
               ("seconds", "s"), ("detail", "text")],
              ((r.number, r.name, r.passed, round(r.seconds, 2),
                '"' + r.detail.replace('"', "'") + '"')
               for r in report.results))
    write_json(os.path.join(out, "acceptance.json"),
               {"passed": report.passed,
                "criteria": [{"number": r.number, "name": r.name,
                              "passed": r.passed, "detail": r.detail,
                              "seconds": round(r.seconds, 3)}
                             for r in report.results]})
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coneflow",
        description="graphical mean curvature flow out of cones: solvers, "
                    "barriers, and the acceptance battery")
    parser.add_argument("--config", metavar="PATH",
                        help="INI scenario file layered over the defaults")
    parser.add_argument("--out", metavar="DIR",
                        help=f"artifact directory (default $"
                             f"{ENV_OUT} or ./results)")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="random seed for randomized checks")
    parser.add_argument("--threads", type=int, metavar="N",
                        help="BLAS/OpenMP thread cap (0 leaves defaults)")
    parser.add_argument("--quick", action="store_true", default=None,
                        help="smaller grids and horizons for smoke runs")
    parser.add_argument("--print-config", action="store_true",
                        help="print the merged configuration and exit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="subcommand")
    for name, blurb in [
            ("expander", "solve the self-similar profile"),
            ("evolve", "run a single graphical flow"),
            ("barrier", "certify static, flowing, and glued barriers"),
            ("verify", "identity, evolution-equation, and BV checks"),
            ("experiment", "run a named scenario"),
            ("suite", "run the acceptance battery")]:
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       dest="sets", help="override a config value")
        if name == "experiment":
            p.add_argument("--name", help="scenario name")
    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage, 0 on --help
        return exc.code if isinstance(exc.code, int) else 2

    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(name)s %(levelname)s: %(message)s")

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        if args.threads is not None:
            cfg["run"]["threads"] = args.threads
        if args.quick is not None:
            cfg["run"]["quick"] = args.quick
        if getattr(args, "name", None):
            cfg["experiment"]["name"] = args.name

        if args.print_config:
            print_config(cfg)
            return 0
        if args.subcommand is None:
            parser.print_usage(sys.stderr)
            return 2

        if cfg["run"]["threads"] > 0:
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                        "MKL_NUM_THREADS"):
                os.environ[var] = str(cfg["run"]["threads"])

        sets = getattr(args, "sets", None)
        if args.subcommand != "experiment":
            _apply_sets(cfg[args.subcommand], sets, args.subcommand)
        out = _resolve_out(args.out)

        if args.subcommand == "expander":
            return _cmd_expander(cfg, out)
        if args.subcommand == "evolve":
            return _cmd_evolve(cfg, out)
        if args.subcommand == "barrier":
            return _cmd_barrier(cfg, out)
        if args.subcommand == "verify":
            return _cmd_verify(cfg, out)
        if args.subcommand == "experiment":
            return _cmd_experiment(cfg, out, sets)
        return _cmd_suite(cfg, out)
    except (ParameterError, DomainError, GridError, ResolutionError) as exc:
        print(f"coneflow: usage error: {exc}", file=sys.stderr)
        return 2
    except CertificationError as exc:
        print(f"coneflow: verdict failure: {exc}", file=sys.stderr)
        return 1
    except (NewtonError, StepFailureError, ShootingError) as exc:
        print(f"coneflow: numerical failure: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    entry()
