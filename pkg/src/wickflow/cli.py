"""Command-line front end.

Subcommands: simulate | gibbs | invariance | identities | regularity |
equivalence | wick-convergence.  A JSON config file supplies the schema
sections (grid, polynomial, solver, sampler, ensemble, output); the flags
--seed/--out/--k/--dt/--threads override the corresponding fields.  The
environment variable WICKFLOW_OUT overrides the output directory.  Every
run writes <out>/<command>_report.json embedding the resolved config and
version string.

Exit codes: 0 success/PASS, 1 experiment reported FAIL, 2 usage or config
error, 3 trajectory blow-up, 4 chain warm-up failure.
"""

import argparse
import json
import os
import sys

from .errors import BlowUpError, ConfigurationError, DomainError
from .experiments import (
    ExperimentConfig,
    run_equivalence,
    run_gibbs,
    run_identities,
    run_invariance,
    run_regularity,
    run_simulate,
    run_wick_convergence,
    version_string,
)

COMMANDS = {
    "simulate": run_simulate,
    "gibbs": run_gibbs,
    "invariance": run_invariance,
    "identities": run_identities,
    "regularity": run_regularity,
    "equivalence": run_equivalence,
    "wick-convergence": run_wick_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wickflow",
        description="Spectral Galerkin simulator and verification suite for "
                    "Wick-renormalized scalar field dynamics on the 2-torus.",
    )
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override ensemble.master_seed")
        p.add_argument("--out", help="override output.dir")
        p.add_argument("--k", type=int, help="override grid.K")
        p.add_argument("--dt", type=float, help="override solver.delta")
        p.add_argument("--threads", type=int, help="trajectory-level parallelism "
                       "(default: available cores; 1 = reproducibility reference)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    cfg = ExperimentConfig.from_dict(data)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.k is not None:
        cfg.K = args.k
    if args.dt is not None:
        cfg.delta = args.dt
    if args.out is not None:
        cfg.out_dir = args.out
    env_out = os.environ.get("WICKFLOW_OUT")
    if env_out:
        cfg.out_dir = env_out
    cfg.threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    cfg.validate()
    return cfg


def _print_report(report: dict) -> None:
    results = report["results"]
    print(f"[{report['experiment']}] {report['version']}")
    if report["experiment"] == "identities":
        for name, value in results["max_residuals"].items():
            status = "ok" if value < 1e-10 else "FAIL"
            print(f"  {name:<24s} max residual {value:.3e}  {status}")
    elif report["experiment"] == "invariance":
        for tag in ("drift_at_delta", "drift_at_half_delta"):
            stats = results[tag]
            worst = max(stats, key=lambda n: abs(stats[n]["z"]))
            print(f"  {tag}: max |z| = {abs(stats[worst]['z']):.2f} ({worst})")
        if "negative_control_max_abs_z" in results:
            print(f"  negative control max |z| = {results['negative_control_max_abs_z']:.2f} "
                  f"(must exceed 3)")
    elif report["experiment"] == "equivalence":
        print(f"  fitted order {results['fitted_order']:.3f} "
              f"(coupled same-step gap {max(results['coupled_same_delta_gap']):.2e})")
    elif report["experiment"] == "regularity":
        print(f"  alpha(Z) in band: {results['alpha_Z']['frac_in_band']:.2%}, "
              f"alpha(Y) >= 0.5: {results['alpha_Y']['frac_above_0.5']:.2%}")
    elif report["experiment"] == "wick_convergence":
        print(f"  monotone fraction {results['fraction_monotone']:.2%}, "
              f"mean distances {results['mean_distances']}")
    if report["pass"] is not None:
        print(f"  => {'PASS' if report['pass'] else 'FAIL'}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigurationError, DomainError, OSError, json.JSONDecodeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        report = COMMANDS[args.command](cfg)
    except (ConfigurationError, DomainError) as err:
        if "warm-up" in str(err):
            print(f"error: {err}", file=sys.stderr)
            return 4
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except BlowUpError as err:
        print(f"blow-up: {err}", file=sys.stderr)
        return 3
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"{args.command.replace('-', '_')}_report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, default=str)
    _print_report(report)
    return 0 if (report["pass"] is None or report["pass"]) else 1


if __name__ == "__main__":
    sys.exit(main())
