"""Command-line entry point: ``locbeam {bound,optimize,sweep,convergence}``.

Exit status is 0 when every point succeeds, 2 when some points failed
(their rows carry a ``failed:`` status) and 1 on a fatal error such as an
invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, build_config, parse_config
from .experiments import run_experiment, write_outputs

log = logging.getLogger("locbeam")


def _build_parser():
    p = argparse.ArgumentParser(prog="locbeam", description="Robust RIS beamforming benchmarks")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "bound": "CSI error bound versus Monte Carlo (bound_sweep or bound_vs_position)",
        "optimize": "single robust design at the first N and eps_dp of the config",
        "sweep": "run the study named by the config's 'kind'",
        "convergence": "per-iteration objective traces",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="JSON config or run manifest (defaults apply when omitted)")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.add_argument("--out-dir", default="results", help="directory for CSV and manifest")
        sp.add_argument("--solver", choices=["sdr", "bnb"], default=None, help="phase solver")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads for independent points")
        sp.add_argument("--timing", action="store_true", help="fill the wall_ms column")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _load(args):
    cfg = parse_config(args.config) if args.config else build_config({})
    over = {}
    if args.solver:
        over["solver"] = {"phase_solver": args.solver}
    if args.seed is not None:
        over.setdefault("solver", {})["seed"] = args.seed
    if args.command == "bound" and cfg.kind not in ("bound_sweep", "bound_vs_position"):
        over["kind"] = "bound_sweep"
    elif args.command == "convergence":
        over["kind"] = "convergence"
    elif args.command == "optimize":
        over["kind"] = "snr_vs_N"
        over["L"] = cfg.L_list[:1]
        over["eps_dp"] = cfg.eps_dp_list[:1]
    return cfg.with_overrides(**over) if over else cfg


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        table = run_experiment(cfg, jobs=args.jobs, timing=args.timing)
        stem = "optimize" if args.command == "optimize" else cfg.kind
        csv_path, man_path = write_outputs(cfg, table, args.out_dir, cfg.seed, stem=stem)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"locbeam: error: {exc}", file=sys.stderr)
        return 1
    if args.command == "optimize":
        print(json.dumps({r.metric: r.value for r in table.rows}, indent=2))
    print(f"wrote {csv_path} ({len(table)} rows, {table.failures} failed) and {man_path}", file=sys.stderr)
    return 2 if table.failures else 0


if __name__ == "__main__":
    sys.exit(main())
