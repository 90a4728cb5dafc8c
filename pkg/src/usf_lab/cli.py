"""``usf-lab`` command line entry point.

Exit status: 0 when every check passes, 1 when a statistical check fails,
2 on a configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run
from .parallel import ENV_WORKERS
from .rng import derive_seed  # noqa: F401  (re-exported for scripting)

log = logging.getLogger("usf_lab")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="usf-lab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="override master_seed")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${ENV_WORKERS} or 1)")
    p.add_argument("--out", help="CSV output path; metadata goes next to it as .json")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        raw = json.loads(open(args.config).read())
    except (OSError, json.JSONDecodeError) as e:
        print(f"usf-lab: cannot read config: {e}", file=sys.stderr)
        return 2
    if isinstance(raw, dict):
        raw.setdefault("experiment", args.subcommand)
        if args.seed is not None:
            raw["master_seed"] = args.seed
        if args.workers is not None:
            raw["workers"] = args.workers
        if args.out is not None:
            raw["out"] = args.out
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except ConfigError as e:
        print(f"usf-lab: config error: {e}", file=sys.stderr)
        return 2
    if cfg.experiment != args.subcommand:
        print(f"usf-lab: config is for {cfg.experiment!r}, not {args.subcommand!r}",
              file=sys.stderr)
        return 2
    table = run(cfg)
    if cfg.out:
        csv_path, meta_path = table.write(cfg.out)
        log.info("wrote %s and %s", csv_path, meta_path)
    else:
        sys.stdout.write(table.csv_text())
    for c in table.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.statistic:g} {c.detail}",
              file=sys.stderr)
    return 0 if table.passed else 1


if __name__ == "__main__":
    sys.exit(main())
