"""Command-line front end: ``stringwave {evolve,lightcone,check,sweep,scenarios}``."""
from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path

from . import runner
from .config import RunConfig, parse_config
from .errors import ConfigError, ValidationError
from .scenarios import list_scenarios, load_scenario

log = logging.getLogger("stringwave")


def _add_common(p, config_required=False):
    src = p.add_mutually_exclusive_group(required=config_required)
    src.add_argument("--config", type=Path, help="TOML config file (or a run.json manifest)")
    src.add_argument("--scenario", help="name of a shipped scenario")
    p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="seed for randomized parts (overrides seed)")


def build_parser():
    parser = argparse.ArgumentParser(prog="stringwave", description="Wave maps with a two-form potential.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run the extrinsic finite-difference solver")
    _add_common(p, config_required=True)
    p.add_argument("--apriori", action="store_true", help="record the O(Nx^2) interaction functional")
    p.add_argument("--snapshot-every", type=int, help="write every n-th step to fields_XXXX.csv")

    p = sub.add_parser("lightcone", help="run the characteristic Picard solver (V = 0 only)")
    _add_common(p, config_required=True)

    p = sub.add_parser("check", help="verify a run directory, or run and verify scenarios")
    p.add_argument("run_dir", nargs="?", type=Path, help="existing run directory to verify")
    _add_common(p)
    p.add_argument("--apriori", action="store_true")
    p.add_argument("--snapshot-every", type=int)

    p = sub.add_parser("sweep", help="scaling study over the lambdas of the [sweep] block")
    _add_common(p, config_required=True)
    p.add_argument("--snapshot-every", type=int)

    sub.add_parser("scenarios", help="list shipped scenarios")
    return parser


def resolve_config(args, mode=None) -> RunConfig:
    cfg = parse_config(args.config) if args.config else load_scenario(args.scenario)
    changes = {}
    if mode is not None:
        changes["mode"] = mode
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "apriori", False):
        changes["output.apriori"] = True
    if getattr(args, "snapshot_every", None) is not None:
        changes["output.snapshot_every"] = args.snapshot_every
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    return cfg.replace(**changes) if changes else cfg


def _check(args) -> int:
    if args.run_dir is not None:
        results = runner.check_run(args.run_dir, args.seed)
        print(runner.report(results))
        return runner.EXIT_OK if all(r.ok for r in results) else runner.EXIT_BREACH
    if args.config is None and args.scenario is None:
        raise ValidationError([("check", "give a run directory, --config or --scenario")])
    names = list_scenarios() if args.scenario == "all" else [None]
    worst = runner.EXIT_OK
    base = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="stringwave-check-"))
    for name in names:
        if name is not None:
            args.scenario = name
        cfg = resolve_config(args)
        mode = cfg.mode if cfg.mode in ("evolve", "lightcone") else "evolve"
        cfg = cfg.replace(mode=mode)
        out = base / name if name is not None else base
        label = name or str(args.config or args.scenario)
        code = runner.run(cfg, out)
        results = runner.check_run(out, args.seed)
        print(f"== {label} ({mode}) -> {out}")
        print(runner.report(results))
        if code == runner.EXIT_OK and not all(r.ok for r in results):
            code = runner.EXIT_BREACH
        worst = max(worst, code)
    return worst


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "scenarios":
            print("\n".join(list_scenarios()))
            return runner.EXIT_OK
        if args.command == "check":
            return _check(args)
        cfg = resolve_config(args, mode=args.command)
        code = runner.run(cfg, Path(cfg.output_dir))
        log.info("%s finished with exit status %d; outputs in %s", args.command, code, cfg.output_dir)
        return code
    except ValidationError as exc:
        for path, msg in exc.errors:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
