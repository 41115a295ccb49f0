"""Command-line front end.

Subcommands:

* ``simulate``: run the learning dynamics from a config, write ``trace.csv``
  and ``summary.json``.
* ``solve``: damped fixed-point iteration on the smooth game, write
  ``equilibrium.json``.
* ``check``: stability and concavity diagnostics, write ``stability.json``.
* ``verify``: run the built-in oracle cross-checks.

Exit codes: 0 success, 1 usage or input error, 2 completed with warnings
(e.g. residual above tolerance), 3 a requested check failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analysis import fixed_point_iterate, stability_check, strong_concavity_check
from .config import ExperimentConfig, load_experiment_config
from .dynamics import RunConfig, classify_schedule, run_dynamics
from .verify import verification_suite

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WARN = 2
EXIT_CHECK_FAILED = 3


def _say(quiet: bool, *parts) -> None:
    if not quiet:
        print(*parts)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


def _load(path: str | None):
    if not path:
        raise ValueError("--config is required for this command")
    return load_experiment_config(path)


def _out_dir(args, cfg: ExperimentConfig) -> str:
    out = args.out or cfg.out_dir
    if not out:
        stem = os.path.splitext(os.path.basename(args.config))[0]
        out = os.path.join(os.path.dirname(os.path.abspath(args.config)), stem + "_out")
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _apply_overrides(args, cfg: ExperimentConfig) -> None:
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "downsample", None) is not None:
        if args.downsample < 1:
            raise ValueError("--downsample must be at least 1")
        cfg.downsample = args.downsample


def cmd_simulate(args) -> int:
    try:
        cfg = _load(args.config)
        _apply_overrides(args, cfg)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))

    warnings = []
    report = classify_schedule(cfg.schedule)
    if not report.sum_diverges:
        warnings.append("step sizes are summable; the dynamics can stall short of equilibrium")
    if not report.ratio_vanishes:
        warnings.append("squared-to-plain step ratio does not vanish; convergence is not guaranteed")
    for w in warnings:
        _say(args.quiet, f"warning: {w}")

    if args.dry_run:
        _say(args.quiet, json.dumps(cfg.describe(), indent=2, sort_keys=True))
        return EXIT_OK

    run = RunConfig(
        horizon=cfg.horizon,
        schedule=cfg.schedule,
        risk_families=cfg.risk_families,
        belief_families=cfg.belief_families,
        initial_estimates=cfg.initial_estimates,
        probability_clamp=cfg.clamp,
        seed=cfg.seed,
        record_every=cfg.downsample,
    )
    try:
        trace = run_dynamics(cfg.game, run)
    except (ValueError, RuntimeError) as exc:
        return _fail(str(exc))

    out = _out_dir(args, cfg)
    trace.to_csv(os.path.join(out, "trace.csv"))
    converged = trace.final_residual <= cfg.tolerances.residual
    trace.summary_to_json(
        os.path.join(out, "summary.json"),
        extra={
            "config": cfg.describe(),
            "converged": bool(converged),
            "residual_tolerance": cfg.tolerances.residual,
            "schedule_sum_diverges": report.sum_diverges,
            "schedule_ratio_vanishes": report.ratio_vanishes,
        },
    )
    _say(args.quiet,
         f"simulate: {cfg.horizon} rounds, final residual {trace.final_residual:.3e} "
         f"(tolerance {cfg.tolerances.residual:g}), outputs in {out}")
    if not converged:
        _say(args.quiet, "warning: final residual above tolerance")
    return EXIT_WARN if warnings or not converged else EXIT_OK


def cmd_solve(args) -> int:
    try:
        cfg = _load(args.config)
        _apply_overrides(args, cfg)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    if args.dry_run:
        _say(args.quiet, json.dumps(cfg.describe(), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        result = fixed_point_iterate(
            cfg.game, cfg.risk_families,
            damping=cfg.tolerances.damping,
            tol=cfg.tolerances.fixed_point,
            max_iter=cfg.tolerances.max_iterations,
        )
    except (ValueError, RuntimeError) as exc:
        return _fail(str(exc))
    out = _out_dir(args, cfg)
    _write_json(os.path.join(out, "equilibrium.json"), {
        "profile": result.profile.probs.tolist(),
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "config": cfg.describe(),
    })
    _say(args.quiet,
         f"solve: residual {result.residual:.3e} after {result.iterations} iterations, "
         f"outputs in {out}")
    if not result.converged:
        _say(args.quiet, "warning: iteration stopped before reaching tolerance")
        return EXIT_WARN
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        cfg = _load(args.config)
        _apply_overrides(args, cfg)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    if args.dry_run:
        _say(args.quiet, json.dumps(cfg.describe(), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        report = stability_check(cfg.game, cfg.risk_families)
        concavity = [strong_concavity_check(fam, n_trials=200, seed=cfg.seed)
                     for fam in cfg.risk_families]
    except (ValueError, RuntimeError) as exc:
        return _fail(str(exc))
    doc = report.to_dict()
    doc["concavity"] = [vars(c) | {} for c in concavity]
    doc["config"] = cfg.describe()
    out = _out_dir(args, cfg)
    _write_json(os.path.join(out, "stability.json"), doc)
    for p in report.players:
        _say(args.quiet,
             f"player {p.player}: curvature {p.curvature:.4g} "
             f"{'>' if p.passed else '<='} coupling {p.coupling:.4g} "
             f"-> {'pass' if p.passed else 'FAIL'}")
    all_ok = report.all_passed and all(c.verified for c in concavity)
    _say(args.quiet,
         f"check: {'stable' if all_ok else 'NOT certified stable'} "
         f"(diagonal dominance {report.diag_dominant}, "
         f"tangent negative-definite {report.negdef_on_tangent}), outputs in {out}")
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_verify(args) -> int:
    if args.dry_run:
        _say(args.quiet, json.dumps({"only": args.only, "checks": "oracle suite"}, indent=2))
        return EXIT_OK
    try:
        manifest = verification_suite(only=args.only)
    except ValueError as exc:
        return _fail(str(exc))
    for name, result in manifest["checks"].items():
        _say(args.quiet,
             f"{'PASS' if result['passed'] else 'FAIL'} {name}: {result['detail']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "verify.json"), manifest)
    return EXIT_OK if manifest["all_passed"] else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beliefgames",
        description="Quantal responses, learning dynamics, and stability checks "
                    "for games with optimistic payoff perturbations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True, downsample=False):
        if needs_config:
            p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        if downsample:
            p.add_argument("--downsample", type=int,
                           help="record every k-th round of the trace")
        p.add_argument("--dry-run", action="store_true",
                       help="print the resolved plan and exit")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    common(sub.add_parser("simulate", help="run the learning dynamics"), downsample=True)
    common(sub.add_parser("solve", help="find the smooth-game fixed point"))
    common(sub.add_parser("check", help="stability diagnostics for a config"))
    p_verify = sub.add_parser("verify", help="run built-in oracle cross-checks")
    p_verify.add_argument("--only", help="run only checks whose name contains this string")
    common(p_verify, needs_config=False)
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "check": cmd_check,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    return _COMMANDS[args.command](args)


def entrypoint() -> None:  # console-script shim
    sys.exit(main())
