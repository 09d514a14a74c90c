"""Command-line interface.

    monolab run --config trial.json [--seed N] [--parallel K] [--out DIR]
    monolab report --in DIR [--format json|csv]
    monolab replay --log game.jsonl

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .board import BoardError
from .harness import (
    ConfigError,
    MetricsError,
    compute_metrics,
    default_out_dir,
    metrics_to_json_dict,
    read_trial_records,
    replay_verify,
    run_suite,
    summary_table,
    trial_config_from_json,
)
from .novelty import NoveltyError


def _load_configs(path: str, seed: int | None, out_dir: str, log_games: bool):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON: {exc}")
    entries = obj["trials"] if isinstance(obj, dict) and "trials" in obj else [obj]
    configs = []
    for i, entry in enumerate(entries):
        config = trial_config_from_json(entry)
        repeat = int(entry.get("repeat", 1))
        for r in range(repeat):
            c = replace(
                config,
                base_seed=(seed if seed is not None else config.base_seed) + r,
                out_dir=out_dir,
                log_games=log_games or config.log_games,
            )
            if not Path(c.board_path).exists():
                raise ConfigError(f"board file not found: {c.board_path}")
            configs.append(c)
    return configs


def _cmd_run(args: argparse.Namespace) -> int:
    out_dir = args.out or default_out_dir()
    configs = _load_configs(args.config, args.seed, out_dir, args.log_games)
    records = run_suite(configs, parallelism=args.parallel)
    failures = [r for r in records if r.error]
    for rec in failures:
        print(f"trial {rec.trial_index}: {rec.error}", file=sys.stderr)
    print(f"wrote {len(records) - len(failures)} trial records to {out_dir}")
    clean = [r for r in records if not r.error]
    if clean:
        print(summary_table(clean))
    return 2 if failures else 0


def _cmd_report(args: argparse.Namespace) -> int:
    records = read_trial_records(args.indir)
    report = compute_metrics(records, nrp_denominator=args.nrp_denominator)
    if args.format == "json":
        print(json.dumps(metrics_to_json_dict(report), indent=2))
        return 0
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["setting", "trials", "pnwp", "win_rate_post", "nda", "nrp"])
    writer.writerow(
        [
            "overall",
            report.trials,
            report.pnwp,
            report.win_rate_post,
            report.nda,
            report.nrp,
        ]
    )
    for key, row in report.per_class.items():
        writer.writerow(
            [key, int(row["trials"]), "", row["win_rate_post"], row["nda"], ""]
        )
    sys.stdout.write(buf.getvalue())
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    if not Path(args.log).exists():
        raise ConfigError(f"log file not found: {args.log}")
    if replay_verify(args.log):
        print(f"{args.log}: replay OK")
        return 0
    print(f"{args.log}: replay MISMATCH", file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monolab", description="Monopoly simulation laboratory"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run trials from a config file")
    run_p.add_argument("--config", required=True, help="trial or suite JSON")
    run_p.add_argument("--seed", type=int, default=None, help="override base seed")
    run_p.add_argument("--parallel", type=int, default=1, help="trials in parallel")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument(
        "--log-games", action="store_true", help="write per-game event logs"
    )
    run_p.set_defaults(func=_cmd_run)

    report_p = sub.add_parser("report", help="compute metrics from records")
    report_p.add_argument("--in", dest="indir", required=True, help="records dir")
    report_p.add_argument("--format", choices=("json", "csv"), default="json")
    report_p.add_argument(
        "--nrp-denominator",
        choices=("own_pre", "baseline_pre"),
        default="own_pre",
    )
    report_p.set_defaults(func=_cmd_report)

    replay_p = sub.add_parser("replay", help="verify a game event log")
    replay_p.add_argument("--log", required=True, help="game log JSONL file")
    replay_p.set_defaults(func=_cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BoardError, NoveltyError, MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
