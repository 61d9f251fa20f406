"""Command line: ``roundtrip run | list-systems | validate``.

Exit codes: 0 success, 2 when some verdict is inconclusive, 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .errors import ConfigError
from .scenario import load_config, run
from .systems import CATALOG, list_builtin_systems, recommended_seed


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roundtrip", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"roundtrip {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("--config", required=True, help="scenario file (YAML or JSON)")
    r.add_argument("--out", default=None, help="output directory (default: scenario 'output' or ./out)")
    r.add_argument("--seed", type=int, default=None, help="override the scenario rng seed")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for independent tasks")
    r.add_argument("--plots", choices=("none", "svg"), default="none")
    r.add_argument("-v", "--verbose", action="store_true")

    ls = sub.add_parser("list-systems", help="show built-in systems and their parameters")
    ls.add_argument("--json", action="store_true", help="machine-readable schema")

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("--config", required=True)
    return p


def _catalog_with_seeds() -> list[dict]:
    out = []
    for entry in list_builtin_systems():
        x0, T = recommended_seed(entry["name"])
        out.append({**entry, "recommended_seed": {"x0": [float(v) for v in x0], "period": float(T)}})
    return out


def cmd_list(args) -> int:
    cat = _catalog_with_seeds()
    if args.json:
        print(json.dumps(cat, indent=2))
        return 0
    for e in cat:
        flag = "reversible" if e["reversible"] else "non-reversible"
        print(f"{e['name']}  ({flag})")
        print(f"    {e['description']}")
        for p in e["params"]:
            print(f"    - {p['name']} = {p['default']}: {p['description']}")
        s = e["recommended_seed"]
        print(f"    seed x0 = {[round(v, 6) for v in s['x0']]}, period ~ {s['period']:.6f}")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1
    print(f"ok: {cfg.name} ({len(cfg.items)} task(s): {', '.join(i.task.value for i in cfg.items)})")
    return 0


def cmd_run(args) -> int:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 1
    report = run(cfg, args.out, jobs=args.jobs, plots=args.plots, seed=args.seed)
    for r in report.results:
        line = f"[{r.index:02d}] {r.task:<20} {r.status.value}"
        if r.message:
            line += f"  ({r.message})"
        print(line)
        for row in r.rows:
            judged = row.get("pass")
            verdict = "info" if judged is None else f"tol {row.get('tolerance', '')}, pass {judged}"
            print(f"      {row.get('quantity', '')}: {row.get('value', '')} ({verdict})")
    print(f"exit code {report.exit_code}; wall clock {report.wall_clock:.1f} s")
    return report.exit_code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-systems":
        return cmd_list(args)
    if args.command == "validate":
        return cmd_validate(args)
    return cmd_run(args)


if __name__ == "__main__":
    raise SystemExit(main())


__all__ = ["main", "CATALOG"]
