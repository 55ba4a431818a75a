"""Command-line entry points: solve, probe, classify.

`solve` runs an experiment (or a batch) and emits a trace CSV plus a JSON
summary per run; `probe` runs diagnostics only; `classify` prints the
schedule regime and control intermittency.  Exit codes: 0 when every run
converged (finitely or to tolerance), 2 when a budget ran out, 1 on any
error.  Logging level comes from the FEASIKIT_LOG environment variable
(error, warn, info, debug).

Traces are reproducible: all randomness flows through numpy's PCG64
generator seeded from the config, and the algorithm identifier is recorded
in the summary.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics, schedules, solver
from .config import (
    DEFAULTS_HELP,
    ExperimentConfig,
    config_from_dict,
    load_config_file,
    problem_to_inline,
)
from .errors import FeasikitError
from .generate import draw_point_in, generate_problem
from .operators import SubgradientProjection

log = logging.getLogger("feasikit")

RNG_ID = "numpy-pcg64"

TRACE_COLUMNS = (
    "k",
    "r_k",
    "alpha_k",
    "active_indices",
    "max_beta",
    "max_displacement",
    "step_norm",
    "max_constraint_distance",
    "in_C",
    "in_Q",
    "oracle_distance",
)


def _setup_logging():
    level = os.environ.get("FEASIKIT_LOG", "warn").lower()
    levels = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "warning": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }
    logging.basicConfig(
        level=levels.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(trace: solver.Trace, path) -> None:
    """Write the trace with the fixed column order and 17-significant-digit floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in trace.rows:
            fields = (
                str(row.k),
                _fmt(row.r_k),
                _fmt(row.alpha_k),
                ";".join(str(i) for i in row.active),
                _fmt(row.max_beta),
                _fmt(row.max_displacement),
                _fmt(row.step_norm),
                _fmt(row.max_constraint_distance),
                "true" if row.in_c else "false",
                "true" if row.in_q else "false",
                "" if row.oracle_distance is None else _fmt(row.oracle_distance),
            )
            fh.write(",".join(fields) + "\n")


@dataclass
class ExperimentOutcome:
    exit_code: int
    trace_path: Path
    summary_path: Path
    summary: dict
    trace: solver.Trace


def _exit_code_for(status: solver.Status) -> int:
    if status is solver.Status.BUDGET_EXHAUSTED:
        return 2
    return 0


def build_problem_and_x0(cfg: ExperimentConfig):
    """Materialize the problem and start point, deterministic in the seed."""
    rng = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    if cfg.generator is not None:
        problem = generate_problem(cfg.generator, rng)
    else:
        problem = cfg.inline_problem
    if isinstance(cfg.x0, str):  # "random"
        x0 = draw_point_in(problem.q, problem.dim, rng)
    else:
        x0 = cfg.x0
    return problem, x0


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutcome:
    """Execute one experiment: solve, write trace.csv and summary.json."""
    t_start = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    problem, x0 = build_problem_and_x0(cfg)
    control = cfg.build_control(problem.m)
    solver_cfg = solver.SolverConfig(
        schedule=cfg.schedule,
        control=control,
        plan=cfg.plan,
        x0=x0,
        max_iterations=cfg.max_iterations,
        mode=cfg.mode,
        convergence_tol=cfg.convergence_tol,
        log_every=cfg.log_every,
    )

    oracle_cfg = diagnostics.OracleConfig(
        method=cfg.diagnostics.oracle_method,
        budget=cfg.diagnostics.oracle_budget,
        tol=cfg.diagnostics.oracle_tol,
    )
    feasibility_sets = [c.set for c in problem.constraints]
    if not isinstance(problem.q, type(None)) and problem.q.dim is not None:
        feasibility_sets = feasibility_sets + [problem.q]
    row_oracle = None
    if cfg.diagnostics.oracle_per_row:
        row_oracle = lambda x: diagnostics.oracle_project(feasibility_sets, x, oracle_cfg).distance

    trace = solver.run(problem, solver_cfg, row_oracle=row_oracle)

    trace_path = out / "trace.csv"
    write_trace_csv(trace, trace_path)

    try:
        classification = schedules.classify(cfg.schedule)
        regime = classification.regime.value
        warnings = list(classification.warnings)
    except FeasikitError:
        regime, warnings = None, ["schedule not classifiable"]
    horizon = max(2 * schedules.period(control), 64)
    intermittency = schedules.minimal_intermittency(control, horizon)

    summary = {
        "status": trace.status.value,
        "k_star": trace.k_star,
        "final_k": trace.final_k,
        "iterations_executed": len(trace.rows),
        "steps_taken": len(trace.iterates) - 1,
        "final_max_constraint_distance": trace.final_residual,
        "exit_code": _exit_code_for(trace.status),
        "seed": cfg.seed,
        "rng": RNG_ID,
        "mode": cfg.mode.value,
        "dimension": problem.dim,
        "m": problem.m,
        "schedule_regime": regime,
        "schedule_warnings": warnings,
        "intermittency_s": intermittency,
        "delta_hat": trace.delta_hat,
        "oracle_distance_final": None,
        "qf": None,
        "runtime_seconds": time.perf_counter() - t_start,
        "trace_csv": str(trace_path),
    }

    if cfg.diagnostics.oracle_final:
        result = diagnostics.oracle_project(feasibility_sets, trace.iterates[-1], oracle_cfg)
        summary["oracle_distance_final"] = result.distance
        if not result.converged:
            summary.setdefault("warnings", []).append("final oracle hit its budget")

    if cfg.diagnostics.qf and problem.witness is not None and len(trace.iterates) > 1:
        fm = diagnostics.qf_verdict(trace, problem.witness, "FM")
        qf_entry = {"FM": fm.passed}
        if trace.delta_hat is not None:
            eps = [
                row.alpha_k * row.r_k / trace.delta_hat
                for row in trace.rows[: len(trace.iterates) - 1]
            ]
            qf1 = diagnostics.qf_verdict(trace, problem.witness, "QF1", eps)
            qf_entry["QF1"] = qf1.passed
            qf_entry["QF1_eps_partial_sum"] = qf1.eps_partial_sum
        summary["qf"] = qf_entry

    summary_path = out / "summary.json"
    with open(summary_path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    # also persist the resolved problem so runs can be replayed inline
    with open(out / "problem.json", "w", newline="\n") as fh:
        json.dump(problem_to_inline(problem), fh)
        fh.write("\n")

    print(
        f"[feasikit] status={summary['status']} k*={summary['k_star']} "
        f"residual={summary['final_max_constraint_distance']:.3e} "
        f"rows={summary['iterations_executed']} out={out}"
    )
    return ExperimentOutcome(
        exit_code=summary["exit_code"],
        trace_path=trace_path,
        summary_path=summary_path,
        summary=summary,
        trace=trace,
    )


def _apply_overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.mode is not None:
        raw.setdefault("solver", {})
        raw["solver"] = dict(raw["solver"], mode=args.mode)
    if args.max_iter is not None:
        raw.setdefault("solver", {})
        raw["solver"] = dict(raw["solver"], max_iterations=args.max_iter)
    return raw


def cmd_solve(args) -> int:
    raw = load_config_file(args.config)
    batch = raw if isinstance(raw, list) else [raw]
    configs = [config_from_dict(_apply_overrides(entry, args)) for entry in batch]

    out_base = Path(args.out) if args.out else None
    jobs = max(1, args.jobs)

    def out_dir_for(i, cfg):
        if len(configs) == 1:
            return out_base if out_base is not None else Path(cfg.out_dir)
        base = out_base if out_base is not None else Path(cfg.out_dir)
        return base / f"exp{i:03d}"

    codes = []
    if jobs == 1 or len(configs) == 1:
        for i, cfg in enumerate(configs):
            codes.append(run_experiment(cfg, out_dir_for(i, cfg)).exit_code)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(run_experiment, cfg, out_dir_for(i, cfg))
                for i, cfg in enumerate(configs)
            ]
            codes = [f.result().exit_code for f in futures]
    return max(codes) if codes else 0


def cmd_probe(args) -> int:
    """Diagnostics-only run: classification, intermittency, lemma probes."""
    cfg = config_from_dict(load_config_file(args.config))
    problem, _ = build_problem_and_x0(cfg)
    control = cfg.build_control(problem.m)
    report = {"checks": {}, "passed": True}

    try:
        classification = schedules.classify(cfg.schedule)
        report["schedule_regime"] = classification.regime.value
        report["schedule_warnings"] = list(classification.warnings)
    except FeasikitError as exc:
        report["schedule_regime"] = None
        report["schedule_warnings"] = [str(exc)]
    report["intermittency_s"] = schedules.minimal_intermittency(
        control, max(2 * schedules.period(control), 64)
    )

    seed = cfg.seed if cfg.seed is not None else 0
    if problem.interior_ball is not None:
        ball = problem.interior_ball
        family = [c.set for c in problem.constraints]
        j0 = None
        if problem.q.dim is not None:
            family = family + [problem.q]
            j0 = len(family)
        # shave the ball radius so exact-margin constructions stay strictly inside
        probe = diagnostics.regularity_probe(
            family,
            interior_center=ball.center,
            interior_radius=ball.radius * (1.0 - 1e-9),
            sample_radius=10.0 * ball.radius,
            n_samples=40,
            seed=seed,
            j0=j0,
        )
        report["checks"]["linear_regularity"] = {
            "passed": probe.passed,
            "kappa_empirical": probe.kappa_empirical,
            "kappa_theoretical": probe.kappa_theoretical,
        }
        report["passed"] &= probe.passed

    sub_fns = [
        c.cutter.f for c in problem.constraints if isinstance(c.cutter, SubgradientProjection)
    ]
    witness = problem.witness
    if sub_fns and witness is not None:
        fw = max(f.value(witness) for f in sub_fns)
        if fw < 0.0:
            sb = diagnostics.subgradient_bound_probe(
                sub_fns, witness, r=1.0, n_samples=200, seed=seed
            )
            report["checks"]["subgradient_bound"] = {
                "passed": sb.passed,
                "bound": sb.bound,
                "min_norm": sb.min_norm,
            }
            report["passed"] &= sb.passed

    out = Path(args.out) if args.out else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "probe_summary.json", "w", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"[feasikit] probe passed={report['passed']} out={out}")
    return 0 if report["passed"] else 1


def cmd_classify(args) -> int:
    cfg = config_from_dict(load_config_file(args.config))
    try:
        classification = schedules.classify(cfg.schedule)
        print(f"regime: {classification.regime.value}")
        print(f"summable: {classification.summable}")
        print(f"converges_to_zero: {classification.converges_to_zero}")
        for w in classification.warnings:
            print(f"warning: {w}")
    except FeasikitError as exc:
        print(f"regime: unclassifiable ({exc})")
    m = cfg.declared_m
    control = cfg.build_control(m)
    s = schedules.minimal_intermittency(control, max(2 * schedules.period(control), 64))
    print(f"intermittency: {s if s is not None else 'NONE'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feasikit",
        description="Overrelaxed cutter methods for convex feasibility problems",
        epilog=DEFAULTS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run an experiment (or a batch list)")
    p_solve.add_argument("config", help="JSON config file")
    p_solve.add_argument("--out", help="output directory (overrides output.dir)")
    p_solve.add_argument("--jobs", type=int, default=1, help="parallel batch jobs")
    p_solve.add_argument("--seed", type=int, help="override the config seed")
    p_solve.add_argument(
        "--mode",
        choices=["certified_finite", "certified_asymptotic", "exploratory"],
        help="override the run mode",
    )
    p_solve.add_argument("--max-iter", type=int, help="override max_iterations")
    p_solve.set_defaults(func=cmd_solve)

    p_probe = sub.add_parser("probe", help="run diagnostics only")
    p_probe.add_argument("config")
    p_probe.add_argument("--out")
    p_probe.set_defaults(func=cmd_probe)

    p_classify = sub.add_parser("classify", help="print schedule regime and intermittency")
    p_classify.add_argument("config")
    p_classify.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FeasikitError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
