"""Command-line front end: reproducible experiments with CSV/JSON artifacts.

Subcommands
    simulate      overlap-vs-noise curve, Monte Carlo joined with mean field
    retrieval     retrieval frequency from random starts
    solve         one mean-field fixed point as JSON
    scan          order parameter along a beta grid, bracketing beta_c
    fluctuations  rescaled overlap fluctuation vs the 1/(1-beta) law
    verify        numerical checks of the rigorous inequalities
    plot          join curve CSVs into a gnuplot data file + script

Exit codes: 0 success, 1 input error, 2 verification failure.  CSV files are
UTF-8 with LF endings and carry a '# relhop ...' provenance comment line;
JSON artifacts carry the same provenance in a "meta" object.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dynamics import (
    DynamicsConfig,
    InitSpec,
    measure_overlap_curve,
    overlap_fluctuations,
    pattern_init,
    random_init,
    retrieval_frequency,
)
from .meanfield import (
    CLASSICAL,
    RELATIVISTIC,
    SelfConsistencyProblem,
    critical_scan,
    fluctuation_theory,
    free_energy,
    solve_fixed_point,
)
from .model import ModelKind, parse_kind
from .utils import parse_beta_grid
from .verification import (
    check_fluctuation_interpolation,
    check_sqrt_convexity,
    check_subadditivity,
    check_t_monotonicity,
)

DEFAULT_SEED = 12345
_CHECKS = ("convexity", "subadditivity", "monotonicity", "fluctuation")


@dataclass
class RunConfig:
    """Everything one invocation needs; built from flags by main()."""

    command: str
    model: ModelKind | None = None
    n: int = 400
    p: int = 3
    beta: float | None = None
    beta_grid: np.ndarray | None = None
    runs: int = 50
    sweeps: int = 1000
    equil: int = 1000
    seed: int = DEFAULT_SEED
    threshold: float = 0.9
    damping: float = 0.5
    tol: float = 1e-12
    init: InitSpec = field(default_factory=pattern_init)
    rule: str = "glauber"
    workers: int = 1
    out: str | None = None
    format: str = "csv"
    check: str | None = None
    n1: int | None = None
    resolution: int = 50
    samples: int = 50
    t_step: float = 0.05
    inputs: list[str] = field(default_factory=list)
    argv: list[str] = field(default_factory=list)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the artifact contract reserves 2 for
    # verification failures and 1 for input errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_init(text: str) -> InitSpec:
    parts = text.split(":")
    if parts[0] == "random" and len(parts) == 1:
        return random_init()
    if parts[0] == "pattern" and len(parts) <= 2:
        return pattern_init(int(parts[1]) if len(parts) == 2 else 0)
    if parts[0] == "corrupted" and len(parts) == 3:
        return InitSpec("corrupted", pattern=int(parts[1]), flip_fraction=float(parts[2]))
    raise argparse.ArgumentTypeError(
        f"bad init {text!r}: use random, pattern[:MU], or corrupted:MU:FRACTION")


def _parse_model(text: str) -> ModelKind:
    try:
        return parse_kind(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _parse_grid(text: str) -> np.ndarray:
    try:
        return parse_beta_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _default_seed() -> int:
    env = os.environ.get("RELHOP_SEED")
    return int(env) if env else DEFAULT_SEED


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relhop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"relhop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, grid=False, beta=False):
        sp.add_argument("--model", type=_parse_model, default=RELATIVISTIC)
        sp.add_argument("--n", type=int, default=400)
        sp.add_argument("--p", type=int, default=3)
        if grid:
            sp.add_argument("--beta-grid", type=_parse_grid, dest="beta_grid")
        if beta:
            sp.add_argument("--beta", type=float)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--format", choices=("csv", "json"), default=None)

    sp = sub.add_parser("simulate", help="overlap curve: Monte Carlo + mean-field join")
    common(sp, grid=True)
    sp.add_argument("--runs", type=int, default=50)
    sp.add_argument("--sweeps", type=int, default=1000)
    sp.add_argument("--equil", type=int, default=1000)
    sp.add_argument("--init", type=_parse_init, default=pattern_init())
    sp.add_argument("--rule", choices=("glauber", "metropolis"), default="glauber")
    sp.add_argument("--damping", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=1e-12)

    sp = sub.add_parser("retrieval", help="retrieval frequency from random starts")
    common(sp, grid=True)
    sp.add_argument("--runs", type=int, default=200)
    sp.add_argument("--sweeps", type=int, default=1000)
    sp.add_argument("--threshold", type=float, default=0.9)
    sp.add_argument("--rule", choices=("glauber", "metropolis"), default="glauber")

    sp = sub.add_parser("solve", help="mean-field fixed point as JSON")
    common(sp, beta=True)
    sp.add_argument("--damping", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=1e-12)

    sp = sub.add_parser("scan", help="order parameter along a beta grid")
    common(sp, grid=True)
    sp.add_argument("--damping", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=1e-12)

    sp = sub.add_parser("fluctuations", help="rescaled overlap fluctuations vs theory")
    common(sp, beta=True)
    sp.add_argument("--runs", type=int, default=24)
    sp.add_argument("--sweeps", type=int, default=1500)
    sp.add_argument("--equil", type=int, default=200)
    sp.add_argument("--rule", choices=("glauber", "metropolis"), default="glauber")

    sp = sub.add_parser("verify", help="numerical checks of the rigorous inequalities")
    sp.add_argument("check", choices=_CHECKS)
    sp.add_argument("--n", type=int, default=12)
    sp.add_argument("--n1", type=int, default=None)
    sp.add_argument("--p", type=int, default=2)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--resolution", type=int, default=50)
    sp.add_argument("--t-step", type=float, default=0.05, dest="t_step")
    sp.add_argument("--sweeps", type=int, default=1500)
    sp.add_argument("--runs", type=int, default=16)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--format", choices=("csv", "json"), default=None)

    sp = sub.add_parser("plot", help="join curve CSVs into gnuplot data + script")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--out", type=str, required=True)

    return parser


def _config_from_args(args, argv) -> RunConfig:
    cfg = RunConfig(command=args.command, argv=list(argv))
    for name in ("model", "n", "p", "beta", "beta_grid", "runs", "sweeps", "equil",
                 "threshold", "damping", "tol", "init", "rule", "workers", "out",
                 "check", "n1", "resolution", "samples", "t_step", "inputs"):
        if hasattr(args, name) and getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    else:
        cfg.seed = _default_seed()
    fmt = getattr(args, "format", None)
    if fmt is not None:
        cfg.format = fmt
    else:
        cfg.format = "json" if args.command in ("solve", "scan", "fluctuations",
                                                "verify") else "csv"
    return cfg


def _provenance(cfg: RunConfig) -> str:
    cmd = " ".join(["relhop"] + cfg.argv) if cfg.argv else f"relhop {cfg.command}"
    return f"relhop {__version__} | cmd: {cmd} | seed: {cfg.seed}"


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="\n") as fh:
            fh.write(text)


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _csv(cfg: RunConfig, header: list[str], rows: list[list]) -> str:
    lines = [f"# {_provenance(cfg)}", ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json(cfg: RunConfig, payload: dict) -> str:
    doc = {"meta": {"version": __version__,
                    "command": " ".join(["relhop"] + cfg.argv) if cfg.argv else cfg.command,
                    "seed": cfg.seed}}
    doc.update(payload)
    return json.dumps(doc, indent=2) + "\n"


def _input_error(message: str) -> int:
    print(f"relhop: error: {message}", file=sys.stderr)
    return 1


def _meanfield_m1(kind: ModelKind, p: int, beta: float, damping: float,
                  tol: float) -> float:
    if kind not in (CLASSICAL, RELATIVISTIC):
        return float("nan")
    m0 = np.zeros(p)
    m0[0] = 0.9
    result = solve_fixed_point(SelfConsistencyProblem(kind, p, beta), m0,
                               damping=damping, tol=tol)
    return float(result.m[0])


def _cmd_simulate(cfg: RunConfig) -> int:
    if cfg.beta_grid is None:
        return _input_error("--beta-grid is required")
    grid = cfg.beta_grid
    template = DynamicsConfig(beta=1.0, rule=cfg.rule, equilibration_sweeps=cfg.equil,
                              measurement_sweeps=cfg.sweeps, seed=cfg.seed, init=cfg.init)
    rows = measure_overlap_curve(cfg.model, cfg.n, cfg.p, grid, cfg.runs, template,
                                 workers=cfg.workers)
    table = []
    for row in rows:
        mf = _meanfield_m1(cfg.model, cfg.p, row.beta, cfg.damping, cfg.tol)
        table.append([cfg.model.label, cfg.n, cfg.p, row.beta, 1.0 / row.beta,
                      row.mean_m1, row.stderr_m1, row.runs, mf])
    header = ["model", "N", "P", "beta", "inv_beta", "mean_m1", "stderr_m1",
              "runs", "meanfield_m1"]
    if cfg.format == "csv":
        _emit(cfg, _csv(cfg, header, table))
    else:
        _emit(cfg, _json(cfg, {"rows": [dict(zip(header, r)) for r in table]}))
    return 0


def _cmd_retrieval(cfg: RunConfig) -> int:
    if cfg.beta_grid is None:
        return _input_error("--beta-grid is required")
    grid = cfg.beta_grid
    rows = retrieval_frequency(cfg.model, cfg.n, cfg.p, grid, cfg.runs,
                               threshold=cfg.threshold, sweeps=cfg.sweeps,
                               seed=cfg.seed, rule=cfg.rule, workers=cfg.workers)
    header = ["model", "N", "P", "beta", "frequency", "runs", "threshold"]
    table = [[cfg.model.label, cfg.n, cfg.p, r.beta, r.frequency, r.runs, cfg.threshold]
             for r in rows]
    if cfg.format == "csv":
        _emit(cfg, _csv(cfg, header, table))
    else:
        _emit(cfg, _json(cfg, {"rows": [dict(zip(header, r)) for r in table]}))
    return 0


def _cmd_solve(cfg: RunConfig) -> int:
    if cfg.beta is None:
        return _input_error("--beta is required")
    try:
        problem = SelfConsistencyProblem(cfg.model, cfg.p, cfg.beta)
    except ValueError as exc:
        return _input_error(str(exc))
    m0 = np.zeros(cfg.p)
    m0[0] = 0.9
    result = solve_fixed_point(problem, m0, damping=cfg.damping, tol=cfg.tol)
    payload = {
        "model": cfg.model.label, "P": cfg.p, "beta": cfg.beta,
        "M": [float(v) for v in result.m],
        "residual": result.residual, "iterations": result.iterations,
        "converged": result.converged,
        "free_energy": free_energy(cfg.model, result.m, cfg.beta),
    }
    _emit(cfg, _json(cfg, payload))
    return 0


def _cmd_scan(cfg: RunConfig) -> int:
    grid = cfg.beta_grid if cfg.beta_grid is not None else parse_beta_grid("0.90:1.10:0.005")
    try:
        scan = critical_scan(cfg.model, grid, cfg.p, tol=cfg.tol, damping=cfg.damping)
    except ValueError as exc:
        return _input_error(str(exc))
    rows = [[cfg.model.label, cfg.p, float(b), float(m)]
            for b, m in zip(scan.betas, scan.m_norms)]
    if cfg.format == "csv":
        text = _csv(cfg, ["model", "P", "beta", "m_norm"], rows)
        beta_c = scan.beta_c if scan.beta_c is not None else "not bracketed"
        text += f"# beta_c: {beta_c}\n"
        _emit(cfg, text)
    else:
        payload = {
            "model": cfg.model.label, "P": cfg.p,
            "rows": [{"beta": r[2], "m_norm": r[3]} for r in rows],
            "beta_c": scan.beta_c if scan.beta_c is not None else "not bracketed",
        }
        _emit(cfg, _json(cfg, payload))
    return 0


def _cmd_fluctuations(cfg: RunConfig) -> int:
    if cfg.beta is None:
        return _input_error("--beta is required")
    try:
        theory = fluctuation_theory(cfg.beta)
        est = overlap_fluctuations(cfg.model, cfg.n, cfg.p, cfg.beta, cfg.runs,
                                   sweeps=cfg.sweeps, equil=cfg.equil, seed=cfg.seed,
                                   rule=cfg.rule, workers=cfg.workers)
    except ValueError as exc:
        return _input_error(str(exc))
    payload = {"model": cfg.model.label, "N": cfg.n, "P": cfg.p, "beta": cfg.beta,
               "value": est.value, "stderr": est.stderr, "theory": theory}
    _emit(cfg, _json(cfg, payload))
    return 0


def _cmd_verify(cfg: RunConfig) -> int:
    name = cfg.check
    worst: dict = {"seed": cfg.seed}
    if name == "convexity":
        try:
            violation = check_sqrt_convexity(cfg.resolution, cfg.p)
        except ValueError as exc:
            return _input_error(str(exc))
        passed = violation <= 1e-12
        payload = {"check": name,
                   "parameters": {"resolution": cfg.resolution, "P": cfg.p},
                   "samples": cfg.resolution ** (2 * cfg.p + 1),
                   "max_violation": violation, "passed": passed, "worst_case": worst}
    elif name == "subadditivity":
        try:
            report = check_subadditivity(cfg.n, cfg.p, cfg.beta, cfg.samples,
                                         seed=cfg.seed, workers=cfg.workers)
        except ValueError as exc:
            return _input_error(str(exc))
        passed = report.all_nonpositive
        worst["split"] = report.worst_split
        worst["sample"] = report.worst_sample
        payload = {"check": name,
                   "parameters": {"N": cfg.n, "P": cfg.p, "beta": cfg.beta},
                   "samples": cfg.samples, "max_margin": report.max_margin,
                   "passed": passed, "worst_case": worst}
    elif name == "monotonicity":
        n1 = cfg.n1 if cfg.n1 is not None else cfg.n // 2
        t_grid = np.arange(0.0, 1.0 + 1e-9, cfg.t_step)
        try:
            report = check_t_monotonicity(cfg.n, n1, cfg.p, t_grid, cfg.samples,
                                          seed=cfg.seed, beta=cfg.beta,
                                          workers=cfg.workers)
        except ValueError as exc:
            return _input_error(str(exc))
        passed = report.monotone
        worst["split"] = n1
        worst["sample"] = report.worst_sample
        payload = {"check": name,
                   "parameters": {"N": cfg.n, "N1": n1, "P": cfg.p, "beta": cfg.beta,
                                  "t_step": cfg.t_step},
                   "samples": cfg.samples, "max_derivative": report.max_derivative,
                   "slack": report.slack, "passed": passed, "worst_case": worst}
    elif name == "fluctuation":
        t_grid = np.arange(0.0, 1.0 + 1e-9, max(cfg.t_step, 0.25))
        try:
            rows = check_fluctuation_interpolation(cfg.n, cfg.beta, t_grid,
                                                   sweeps=cfg.sweeps, runs=cfg.runs,
                                                   seed=cfg.seed, workers=cfg.workers)
        except ValueError as exc:
            return _input_error(str(exc))
        devs = [abs(r.value - r.theory) - max(0.15 * r.theory, 3.0 * r.stderr)
                for r in rows]
        passed = max(devs) <= 0.0
        worst["t"] = rows[int(np.argmax(devs))].t
        payload = {"check": name,
                   "parameters": {"N": cfg.n, "beta": cfg.beta,
                                  "t_grid": [r.t for r in rows]},
                   "samples": cfg.runs,
                   "rows": [{"t": r.t, "value": r.value, "stderr": r.stderr,
                             "theory": r.theory} for r in rows],
                   "max_deviation": max(abs(r.value - r.theory) for r in rows),
                   "passed": passed, "worst_case": worst}
    else:  # unreachable behind argparse choices
        return _input_error(f"unknown check {name!r}")
    _emit(cfg, _json(cfg, payload))
    return 0 if payload["passed"] else 2


def _read_curve_csv(path: str) -> tuple[list[str], list[dict]]:
    if not os.path.exists(path):
        raise ValueError(f"input file {path} does not exist")
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"input file {path} is empty")
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append(dict(zip(header, parts)))
    if not rows:
        raise ValueError(f"input file {path} has no data rows")
    return header, rows


def emit_plot_data(inputs: list[str], out_prefix: str, cfg: RunConfig) -> int:
    """Join curve CSVs on their beta grid into <out>.dat plus a gnuplot script.

    Overlap-curve inputs contribute a Monte Carlo column per model plus a
    theory column when the file carries the mean-field join; retrieval inputs
    contribute a frequency column per model.
    """
    tables = []
    curve_mode = None
    for path in inputs:
        header, rows = _read_curve_csv(path)
        if "mean_m1" in header:
            mode = "curve"
        elif "frequency" in header:
            mode = "retrieval"
        else:
            print("relhop: error: missing column: need mean_m1 or frequency "
                  f"in {path}", file=sys.stderr)
            return 1
        for col in ("model", "beta", "inv_beta" if mode == "curve" else "beta"):
            if col not in header:
                print(f"relhop: error: missing column {col!r} in {path}",
                      file=sys.stderr)
                return 1
        if curve_mode is None:
            curve_mode = mode
        elif curve_mode != mode:
            print("relhop: error: cannot mix overlap and retrieval inputs",
                  file=sys.stderr)
            return 1
        tables.append((path, header, rows))

    base = tables[0][2]
    betas = [float(r["beta"]) for r in base]
    for path, _, rows in tables[1:]:
        if [float(r["beta"]) for r in rows] != betas:
            print(f"relhop: error: beta grid of {path} does not match the first input",
                  file=sys.stderr)
            return 1

    columns = ["inv_beta"]
    data = [[1.0 / b for b in betas]]
    theory_cols = []
    for path, header, rows in tables:
        model = rows[0]["model"]
        if curve_mode == "curve":
            columns.append(model)
            data.append([float(r["mean_m1"]) for r in rows])
            if "meanfield_m1" in header:
                vals = [float(r["meanfield_m1"]) for r in rows]
                theory_cols.append((model, vals))
        else:
            columns.append(f"{model}_frequency")
            data.append([float(r["frequency"]) for r in rows])
    if len(theory_cols) == 1:
        columns.append("theory")
        data.append(theory_cols[0][1])
    else:
        for model, vals in theory_cols:
            columns.append(f"theory_{model}")
            data.append(vals)

    dat_path = f"{out_prefix}.dat"
    gp_path = f"{out_prefix}.gp"
    lines = [f"# {_provenance(cfg)}", "# " + " ".join(columns)]
    for i in range(len(betas)):
        lines.append(" ".join(_fmt(col[i]) for col in data))
    with open(dat_path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    plots = []
    for j, name in enumerate(columns[1:], start=2):
        style = "lines" if name.startswith("theory") else "points"
        plots.append(f"'{os.path.basename(dat_path)}' using 1:{j} with {style} "
                     f"title '{name}'")
    gp = [
        f"# {_provenance(cfg)}",
        "set terminal pngcairo size 900,600",
        f"set output '{os.path.basename(out_prefix)}.png'",
        "set xlabel '1/beta (noise level)'",
        "set ylabel '" + ("retrieval frequency" if curve_mode == "retrieval"
                          else "Mattis overlap m_1") + "'",
        "set key outside",
        "plot " + ", \\\n     ".join(plots),
    ]
    with open(gp_path, "w", newline="\n") as fh:
        fh.write("\n".join(gp) + "\n")
    return 0


def run(cfg: RunConfig) -> int:
    """Dispatch a parsed configuration; returns the process exit code."""
    handlers = {
        "simulate": _cmd_simulate,
        "retrieval": _cmd_retrieval,
        "solve": _cmd_solve,
        "scan": _cmd_scan,
        "fluctuations": _cmd_fluctuations,
        "verify": _cmd_verify,
    }
    if cfg.command == "plot":
        try:
            return emit_plot_data(cfg.inputs, cfg.out, cfg)
        except ValueError as exc:
            return _input_error(str(exc))
    if cfg.command not in handlers:
        return _input_error(f"unknown command {cfg.command!r}")
    if cfg.out not in (None, "-"):
        parent = os.path.dirname(os.path.abspath(cfg.out))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            return _input_error(f"output path {cfg.out} is not writable")
    try:
        return handlers[cfg.command](cfg)
    except ValueError as exc:
        return _input_error(str(exc))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config_from_args(args, argv)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
