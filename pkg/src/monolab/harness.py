"""Trial runner and metrics.

A trial is a fixed-length sequence of games (default 100) sharing one
injected novelty and one persistent set of agents, so detector state
carries across the games of a trial and resets between trials. Per-game
seeds derive from a stable hash of (base seed, game index), which makes
whole trials reproducible and safe to run in parallel.

Metrics follow the evaluation protocol: the focal agent's pre-novelty
win percentage (pooled over trials), its post-novelty win rate, the
fraction of trials with a correct and false-positive-free detection,
and the post/pre win-ratio quotient with a configurable denominator.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .agents import make_agent
from .board import BoardSpec, load_board_spec
from .engine import (
    DEFAULT_RULES,
    EngineRules,
    GameResult,
    event_to_line,
    play_game,
)
from .novelty import (
    NoveltySpec,
    generate_novelty,
    novelty_from_json_dict,
    novelty_to_json_dict,
    validate_novelty_compat,
)

SCHEMA_VERSION = 1

NRP_OWN_PRE = "own_pre"
NRP_BASELINE_PRE = "baseline_pre"


class ConfigError(ValueError):
    """The trial configuration is unusable."""


class MetricsError(ValueError):
    """The requested metric is undefined for these records."""


def stable_hash(*parts: Any) -> int:
    """Platform-independent 63-bit hash for seed derivation."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class AgentSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class TrialConfig:
    board_path: str
    agents: list[AgentSpec]
    games_per_trial: int = 100
    novelty: NoveltySpec | None = None
    novelty_seed: int | None = None
    base_seed: int = 0
    max_rounds: int = 200
    parallelism: int = 1
    out_dir: str | None = None
    log_games: bool = False
    nrp_denominator: str = NRP_OWN_PRE
    rules: EngineRules = DEFAULT_RULES

    def __post_init__(self) -> None:
        if not 2 <= len(self.agents) <= 4:
            raise ConfigError(f"agent roster must have 2..4 seats, got {len(self.agents)}")
        if self.games_per_trial < 1:
            raise ConfigError("games_per_trial must be >= 1")
        if self.nrp_denominator not in (NRP_OWN_PRE, NRP_BASELINE_PRE):
            raise ConfigError(f"unknown nrp denominator {self.nrp_denominator!r}")

    def digest(self) -> str:
        body = json.dumps(
            {
                "board": self.board_path,
                "agents": [(a.name, sorted(a.params.items())) for a in self.agents],
                "games": self.games_per_trial,
                "novelty": novelty_to_json_dict(self.novelty) if self.novelty else None,
                "novelty_seed": self.novelty_seed,
                "seed": self.base_seed,
                "max_rounds": self.max_rounds,
            },
            sort_keys=True,
        )
        return hashlib.sha256(body.encode()).hexdigest()[:16]


def trial_config_from_json(obj: dict[str, Any]) -> TrialConfig:
    try:
        agents = [
            AgentSpec(name=a["agent"] if "agent" in a else a["name"],
                      params=dict(a.get("params", {})))
            for a in obj["agents"]
        ]
        novelty = (
            novelty_from_json_dict(obj["novelty"]) if obj.get("novelty") else None
        )
        return TrialConfig(
            board_path=obj["board"],
            agents=agents,
            games_per_trial=int(obj.get("games_per_trial", 100)),
            novelty=novelty,
            novelty_seed=obj.get("novelty_seed"),
            base_seed=int(obj.get("seed", 0)),
            max_rounds=int(obj.get("max_rounds", 200)),
            parallelism=int(obj.get("parallelism", 1)),
            out_dir=obj.get("out_dir"),
            log_games=bool(obj.get("log_games", False)),
            nrp_denominator=obj.get("nrp_denominator", NRP_OWN_PRE),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad trial config: {exc}") from exc


@dataclass
class GameRecord:
    game: int
    winner: int | None
    rounds: int
    novelty_active: bool


@dataclass
class TrialRecord:
    trial_index: int
    seed: int
    config_digest: str
    games: list[GameRecord]
    trigger_game: int | None
    detection: int | None
    novelty_class: str | None = None
    novelty_difficulty: str | None = None
    error: str | None = None

    @property
    def games_per_trial(self) -> int:
        return len(self.games)


@dataclass
class MetricsReport:
    pnwp: float | None
    win_rate_post: float | None
    nda: float | None
    nrp: float | None
    nrp_denominator: str
    trials: int
    games: int
    focal_agent: int
    per_class: dict[str, dict[str, float | None]] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


# ---------------------------------------------------------------------------
# Running trials
# ---------------------------------------------------------------------------


def _build_agents(config: TrialConfig) -> list:
    return [
        make_agent(
            spec.name,
            seat,
            seed=stable_hash(config.base_seed, "agent", seat),
            params=spec.params,
        )
        for seat, spec in enumerate(config.agents)
    ]


def run_trial(
    config: TrialConfig,
    trial_index: int = 0,
    board: BoardSpec | None = None,
) -> TrialRecord:
    """Play the trial's games in order with one persistent agent roster.

    The novelty (given directly or generated from `novelty_seed`) applies
    from its trigger game to the end of the trial.
    """
    if board is None:
        board = load_board_spec(config.board_path)
    novelty = config.novelty
    if novelty is None and config.novelty_seed is not None:
        novelty = generate_novelty(
            board,
            stable_hash(config.novelty_seed, trial_index),
            config.games_per_trial,
        )
    if novelty is not None:
        validate_novelty_compat(board, novelty)

    agents = _build_agents(config)
    focal = agents[0]
    games: list[GameRecord] = []
    game_logs: list[tuple[int, GameResult]] = []
    for g in range(config.games_per_trial):
        active = novelty if (novelty is not None and g >= novelty.trigger_game) else None
        result = play_game(
            agents,
            board,
            novelty=active,
            seed=stable_hash(config.base_seed, trial_index, g),
            max_rounds=config.max_rounds,
            rules=config.rules,
            game_index=g,
        )
        games.append(
            GameRecord(
                game=g,
                winner=result.winner,
                rounds=result.rounds,
                novelty_active=active is not None,
            )
        )
        if config.log_games:
            game_logs.append((g, result))

    record = TrialRecord(
        trial_index=trial_index,
        seed=config.base_seed,
        config_digest=config.digest(),
        games=games,
        trigger_game=novelty.trigger_game if novelty else None,
        detection=getattr(focal, "detection", None),
        novelty_class=novelty.novelty_class if novelty else None,
        novelty_difficulty=novelty.difficulty if novelty else None,
    )
    if config.out_dir:
        write_trial_record(record, config, trial_index)
        for g, result in game_logs:
            write_game_log(config, trial_index, g, result, novelty)
    return record


def _record_path(out_dir: str, trial_index: int) -> Path:
    return Path(out_dir) / f"trial_{trial_index:04d}.jsonl"


def write_trial_record(
    record: TrialRecord, config: TrialConfig, trial_index: int
) -> Path:
    path = _record_path(config.out_dir, trial_index)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "record": "trial",
        "schema_version": SCHEMA_VERSION,
        "trial_index": record.trial_index,
        "seed": record.seed,
        "config_digest": record.config_digest,
        "trigger_game": record.trigger_game,
        "detection": record.detection,
        "novelty_class": record.novelty_class,
        "novelty_difficulty": record.novelty_difficulty,
        "error": record.error,
    }
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for game in record.games:
            fh.write(
                json.dumps(
                    {
                        "record": "game",
                        "game": game.game,
                        "winner": game.winner,
                        "rounds": game.rounds,
                        "novelty_active": game.novelty_active,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return path


def read_trial_record(path: str | Path) -> TrialRecord:
    games: list[GameRecord] = []
    header: dict[str, Any] | None = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("record") == "trial":
                header = obj
            elif obj.get("record") == "game":
                games.append(
                    GameRecord(
                        game=obj["game"],
                        winner=obj["winner"],
                        rounds=obj["rounds"],
                        novelty_active=obj["novelty_active"],
                    )
                )
    if header is None:
        raise ConfigError(f"{path}: no trial header line")
    return TrialRecord(
        trial_index=header["trial_index"],
        seed=header["seed"],
        config_digest=header["config_digest"],
        games=games,
        trigger_game=header["trigger_game"],
        detection=header["detection"],
        novelty_class=header.get("novelty_class"),
        novelty_difficulty=header.get("novelty_difficulty"),
        error=header.get("error"),
    )


def read_trial_records(directory: str | Path) -> list[TrialRecord]:
    paths = sorted(Path(directory).glob("trial_*.jsonl"))
    if not paths:
        raise ConfigError(f"{directory}: no trial records found")
    return [read_trial_record(p) for p in paths]


def write_game_log(
    config: TrialConfig,
    trial_index: int,
    game_index: int,
    result: GameResult,
    novelty: NoveltySpec | None,
) -> Path:
    """One JSONL file per game: a replay header line, then the events."""
    path = (
        Path(config.out_dir)
        / "games"
        / f"trial_{trial_index:04d}_game_{game_index:04d}.jsonl"
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    active = novelty is not None and game_index >= novelty.trigger_game
    header = {
        "record": "game_log",
        "schema_version": SCHEMA_VERSION,
        "board": config.board_path,
        "agents": [
            {"agent": a.name, "params": a.params} for a in config.agents
        ],
        "agent_seeds": [
            stable_hash(config.base_seed, "agent", seat)
            for seat in range(len(config.agents))
        ],
        "seed": stable_hash(config.base_seed, trial_index, game_index),
        "max_rounds": config.max_rounds,
        "game_index": game_index,
        "novelty": novelty_to_json_dict(novelty) if active else None,
    }
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for event in result.events:
            fh.write(event_to_line(event) + "\n")
    return path


def replay_verify(log_path: str | Path) -> bool:
    """Re-run the game described by a log header and compare the event
    stream byte for byte."""
    with open(log_path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    header = json.loads(lines[0])
    if header.get("record") != "game_log":
        raise ConfigError(f"{log_path}: missing game_log header")
    board = load_board_spec(header["board"])
    agents = [
        make_agent(spec["agent"], seat, seed=header["agent_seeds"][seat],
                   params=spec.get("params", {}))
        for seat, spec in enumerate(header["agents"])
    ]
    novelty = (
        novelty_from_json_dict(header["novelty"]) if header.get("novelty") else None
    )
    result = play_game(
        agents,
        board,
        novelty=novelty,
        seed=header["seed"],
        max_rounds=header["max_rounds"],
        game_index=header["game_index"],
    )
    replayed = [event_to_line(ev) for ev in result.events]
    return replayed == lines[1:]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def compute_metrics(
    records: Sequence[TrialRecord],
    focal_agent: int = 0,
    nrp_denominator: str = NRP_OWN_PRE,
    n_baselines: int | None = None,
) -> MetricsReport:
    """Pooled win ratios over all games of all trials.

    Games before a trial's trigger (or all games of a novelty-free
    trial) are pre-novelty; games at or after the trigger are post.
    A detection is correct when the single announcement of the trial
    falls at or after the trigger.
    """
    if not records:
        raise MetricsError("no trial records")
    pre_games = pre_wins = post_games = post_wins = 0
    pre_baseline_wins = 0
    novelty_trials = 0
    detected = 0
    groups: dict[str, list[TrialRecord]] = {}
    for rec in records:
        if rec.error:
            continue
        trigger = rec.trigger_game
        for game in rec.games:
            pre = trigger is None or game.game < trigger
            if pre:
                pre_games += 1
                pre_wins += int(game.winner == focal_agent)
                pre_baseline_wins += int(
                    game.winner is not None and game.winner != focal_agent
                )
            else:
                post_games += 1
                post_wins += int(game.winner == focal_agent)
        if trigger is not None:
            novelty_trials += 1
            if rec.detection is not None and rec.detection >= trigger:
                detected += 1
            key = f"{rec.novelty_class}-{rec.novelty_difficulty}"
            groups.setdefault(key, []).append(rec)

    if pre_games == 0:
        raise MetricsError("PNWP undefined: no pre-novelty games")
    pnwp = pre_wins / pre_games
    win_rate_post = post_wins / post_games if post_games else None
    nda = detected / novelty_trials if novelty_trials else None

    nrp = None
    if win_rate_post is not None:
        if nrp_denominator == NRP_OWN_PRE:
            denom = pnwp
        else:
            baselines = n_baselines or max(
                (len({g.winner for r in records for g in r.games
                      if g.winner is not None}) - 1),
                1,
            )
            denom = pre_baseline_wins / pre_games / baselines
        if denom == 0:
            raise MetricsError("NRP undefined: zero denominator")
        nrp = win_rate_post / denom

    per_class: dict[str, dict[str, float | None]] = {}
    for key, recs in sorted(groups.items()):
        g_post = sum(
            1 for r in recs for g in r.games if g.game >= r.trigger_game
        )
        w_post = sum(
            1
            for r in recs
            for g in r.games
            if g.game >= r.trigger_game and g.winner == focal_agent
        )
        d = sum(
            1
            for r in recs
            if r.detection is not None and r.detection >= r.trigger_game
        )
        per_class[key] = {
            "trials": float(len(recs)),
            "nda": d / len(recs),
            "win_rate_post": (w_post / g_post) if g_post else None,
        }

    return MetricsReport(
        pnwp=pnwp,
        win_rate_post=win_rate_post,
        nda=nda,
        nrp=nrp,
        nrp_denominator=nrp_denominator,
        trials=len(records),
        games=sum(len(r.games) for r in records),
        focal_agent=focal_agent,
        per_class=per_class,
    )


def metrics_to_json_dict(report: MetricsReport) -> dict[str, Any]:
    return {
        "schema_version": report.schema_version,
        "pnwp": report.pnwp,
        "win_rate_post": report.win_rate_post,
        "nda": report.nda,
        "nrp": report.nrp,
        "nrp_denominator": report.nrp_denominator,
        "trials": report.trials,
        "games": report.games,
        "focal_agent": report.focal_agent,
        "per_class": report.per_class,
    }


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def _run_trial_job(args: tuple) -> TrialRecord:
    config, trial_index = args
    try:
        return run_trial(config, trial_index)
    except Exception as exc:  # propagate per-trial, suite continues
        return TrialRecord(
            trial_index=trial_index,
            seed=config.base_seed,
            config_digest=config.digest(),
            games=[],
            trigger_game=None,
            detection=None,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_suite(
    configs: Sequence[TrialConfig],
    parallelism: int = 1,
) -> list[TrialRecord]:
    """Run one trial per config; parallel across trials, never within a
    game. Failed trials carry their error and do not stop the suite."""
    jobs = [(config, i) for i, config in enumerate(configs)]
    if parallelism <= 1 or len(jobs) <= 1:
        return [_run_trial_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_trial_job, jobs))


def summary_table(records: Sequence[TrialRecord], focal_agent: int = 0) -> str:
    """Per novelty-setting summary in rows of class-difficulty."""
    report = compute_metrics(records, focal_agent)
    lines = [
        f"{'setting':<14} {'trials':>6} {'NDA(%)':>8} {'win-rate(%)':>12}",
    ]
    pnwp = f"{report.pnwp * 100:.2f}" if report.pnwp is not None else "-"
    lines.append(f"{'pre-novelty':<14} {report.trials:>6} {'-':>8} {pnwp:>12}")
    for key, row in report.per_class.items():
        nda = f"{row['nda'] * 100:.2f}" if row["nda"] is not None else "-"
        wr = (
            f"{row['win_rate_post'] * 100:.2f}"
            if row["win_rate_post"] is not None
            else "-"
        )
        lines.append(f"{key:<14} {int(row['trials']):>6} {nda:>8} {wr:>12}")
    return "\n".join(lines)


def default_out_dir() -> str:
    return os.environ.get("MONOLAB_OUT", "out")
