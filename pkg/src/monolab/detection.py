"""Online novelty detection from states, action outcomes, and dice rolls.

Three detector families feed one announcement gate:

* exact state checks — every directly visible board attribute (rents,
  prices, taxes, the Go bonus, square order and colors) is compared to a
  snapshot taken before the first game; any mismatch is a deterministic
  deviation with confidence 1.
* outcome checks — payouts whose size is attribute-determined (mortgage,
  unmortgage, improvement resale, Go bonus, card payments) are compared
  to the expected amount, which lets hidden attributes (mortgage values,
  the interest rate, card amounts) be inferred.
* dice checks — rolls update per-die Dirichlet counts; die count and
  face support changes are deterministic deviations, while weight drift
  is flagged once the MAP estimate diverges from the known weights.

Each attribute path is reported once per trial, and the announcement
gate fires at most once per trial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable

from .board import KIND_PROPERTY, KIND_TAX, BoardSpec, DiceSpec
from .engine import StateView

PRIOR_FLOOR = 2.0


@dataclass(frozen=True)
class DeviationEvent:
    path: str
    expected: Any
    observed: Any
    game_index: int
    confidence: float


@dataclass(frozen=True)
class DetectorConfig:
    drift_enabled: bool = True
    drift_min_rolls: int = 60
    drift_kl_threshold: float = 0.02
    announce_threshold: float = 0.95


# ---------------------------------------------------------------------------
# Attribute tracking (exact detectors)
# ---------------------------------------------------------------------------


def _visible_attributes(board: BoardSpec) -> dict[str, Any]:
    """Snapshot of every attribute an agent can read off the state."""
    table: dict[str, Any] = {
        "go_increment": board.go_increment,
    }
    for i, sq in enumerate(board.squares):
        table[f"square.{i}.kind"] = sq.kind
        if sq.kind == KIND_PROPERTY:
            table[f"square.{i}.color"] = sq.color
            table[f"price.{i}"] = sq.price
            table[f"house_cost.{i}"] = sq.house_cost
            for tier, rent in sq.rent_tiers():
                table[f"rent.{i}.{tier}"] = rent
        elif sq.kind == KIND_TAX:
            table[f"tax.{i}"] = sq.tax_amount
    for color, members in board.colors.items():
        table[f"color.{color}.required"] = board.required_for_monopoly(color)
    return table


class AttributeTracker:
    """Holds the expected-attribute table and deduplicates reports."""

    def __init__(self, board: BoardSpec) -> None:
        self.baseline = board
        self.expected = _visible_attributes(board)
        self.reported: set[str] = set()

    def _report(
        self, path: str, expected: Any, observed: Any, game_index: int
    ) -> list[DeviationEvent]:
        if path in self.reported:
            return []
        self.reported.add(path)
        return [
            DeviationEvent(
                path=path,
                expected=expected,
                observed=observed,
                game_index=game_index,
                confidence=1.0,
            )
        ]

    def observe_state(self, view: StateView, game_index: int = 0) -> list[DeviationEvent]:
        """Compare every visible attribute of the current board to the
        snapshot; report each changed path once."""
        out: list[DeviationEvent] = []
        current = _visible_attributes(view.board)
        for path, expected in self.expected.items():
            observed = current.get(path)
            if observed != expected:
                out.extend(self._report(path, expected, observed, game_index))
        for path in current.keys() - self.expected.keys():
            out.extend(self._report(path, None, current[path], game_index))
        return out

    def observe_outcome(
        self, event: dict[str, Any], game_index: int = 0
    ) -> list[DeviationEvent]:
        """Infer hidden attribute changes from the cash outcome of an
        attribute-determined action."""
        kind = event["kind"]
        payload = event["payload"]
        board = self.baseline

        if kind == "mortgage":
            sq = payload["square"]
            expected = board.squares[sq].mortgage_value
            observed = payload["value"]
            if observed != expected:
                return self._report(f"mortgage_value.{sq}", expected, observed, game_index)
            return []

        if kind == "unmortgage":
            sq = payload["square"]
            expected_cost = board.unmortgage_cost(sq)
            observed_cost = payload["price"]
            if observed_cost != expected_cost:
                principal = board.squares[sq].mortgage_value
                inferred = (
                    (observed_cost - principal) / principal if principal else None
                )
                return self._report(
                    "mortgage_rate",
                    board.mortgage_interest_rate,
                    inferred,
                    game_index,
                )
            return []

        if kind == "sell_improvement":
            sq = payload["square"]
            expected = board.squares[sq].house_cost * 0.5
            observed = payload["refund"]
            if observed != expected:
                return self._report(
                    f"house_cost.{sq}", board.squares[sq].house_cost,
                    observed / 0.5, game_index,
                )
            return []

        if kind == "go_bonus":
            observed = payload["amount"]
            if observed != board.go_increment:
                return self._report(
                    "go_increment", board.go_increment, observed, game_index
                )
            return []

        if kind == "tax_paid":
            sq = payload["square"]
            expected = board.squares[sq].tax_amount
            if payload["amount"] != expected:
                return self._report(f"tax.{sq}", expected, payload["amount"], game_index)
            return []

        if kind == "card_drawn" and payload.get("effect") in ("pay", "receive"):
            deck = (
                board.chance_deck
                if payload["deck"] == "chance"
                else board.community_deck
            )
            idx = payload["index"]
            if idx < len(deck):
                expected = deck[idx].amount
                if payload.get("amount") != expected:
                    return self._report(
                        f"card.{payload['deck']}.{idx}.amount",
                        expected,
                        payload.get("amount"),
                        game_index,
                    )
            return []

        return []


# ---------------------------------------------------------------------------
# Dice beliefs (Dirichlet counts with MAP estimates)
# ---------------------------------------------------------------------------


@dataclass
class DieBelief:
    alpha: dict[int, float]
    prior: dict[int, float]
    n: int = 0
    new_faces: set[int] = field(default_factory=set)

    @classmethod
    def from_faces(cls, faces: Iterable[int]) -> "DieBelief":
        prior = {int(f): PRIOR_FLOOR for f in faces}
        return cls(alpha=dict(prior), prior=dict(prior))

    def observe(self, face: int) -> None:
        if face not in self.alpha:
            self.alpha[face] = PRIOR_FLOOR
            self.prior[face] = PRIOR_FLOOR
            self.new_faces.add(face)
        self.alpha[face] += 1.0
        self.n += 1


class DiceBeliefs:
    """Per-die face-count hypotheses plus a die-count hypothesis."""

    def __init__(self, spec: DiceSpec) -> None:
        self.spec = spec
        self.dies = [DieBelief.from_faces(d.faces) for d in spec.dice]
        self.observed_die_count: int | None = None

    @property
    def total_rolls(self) -> int:
        return max((d.n for d in self.dies), default=0)

    def observe_roll(self, faces: list[int]) -> None:
        if self.observed_die_count is None or len(faces) != self.observed_die_count:
            self.observed_die_count = len(faces)
        while len(self.dies) < len(faces):
            self.dies.append(DieBelief.from_faces([]))
        for die, face in zip(self.dies, faces):
            die.observe(face)

    def to_dice_model(self) -> list[tuple[tuple[int, ...], tuple[float, ...]]]:
        """MAP dice model for landing probability computations."""
        count = (
            self.observed_die_count
            if self.observed_die_count is not None
            else len(self.spec.dice)
        )
        model = []
        for i, die in enumerate(self.dies[:count]):
            faces = tuple(sorted(die.alpha))
            if not faces:
                continue
            probs = dice_map_estimate(self, i)
            model.append((faces, tuple(probs[f] for f in faces)))
        return model


def dice_map_estimate(beliefs: DiceBeliefs, die_index: int) -> dict[int, float]:
    """Posterior mode of the face distribution: (a_i - 1) / (sum_a - K).

    The prior floor of 2 keeps every a_i > 1 so the mode is interior and
    always defined.
    """
    die = beliefs.dies[die_index]
    if not die.alpha:
        raise ValueError("die has no face support")
    k = len(die.alpha)
    total = sum(die.alpha.values())
    denom = total - k
    if denom <= 0:
        raise ValueError("degenerate Dirichlet: sum(alpha) - K <= 0")
    return {face: (a - 1.0) / denom for face, a in sorted(die.alpha.items())}


def kl_divergence(p: dict[int, float], q: dict[int, float]) -> float:
    """KL(p || q) in nats over p's support; q must cover it."""
    total = 0.0
    for face, pv in p.items():
        if pv <= 0.0:
            continue
        qv = q.get(face, 0.0)
        if qv <= 0.0:
            return math.inf
        total += pv * math.log(pv / qv)
    return total


def detect_dice_novelty(
    beliefs: DiceBeliefs,
    spec: DiceSpec,
    game_index: int = 0,
    config: DetectorConfig = DetectorConfig(),
) -> list[DeviationEvent]:
    """Structure deviations (die count, new faces) are certain; weight
    drift is reported once the MAP diverges from the spec weights."""
    out: list[DeviationEvent] = []
    if (
        beliefs.observed_die_count is not None
        and beliefs.observed_die_count != len(spec.dice)
    ):
        out.append(
            DeviationEvent(
                path="dice.count",
                expected=len(spec.dice),
                observed=beliefs.observed_die_count,
                game_index=game_index,
                confidence=1.0,
            )
        )
    for i, die in enumerate(beliefs.dies):
        if die.new_faces:
            expected_faces = (
                sorted(spec.dice[i].faces) if i < len(spec.dice) else []
            )
            out.append(
                DeviationEvent(
                    path=f"dice.{i}.faces",
                    expected=expected_faces,
                    observed=sorted(die.alpha),
                    game_index=game_index,
                    confidence=1.0,
                )
            )
            continue
        if not config.drift_enabled or i >= len(spec.dice):
            continue
        if die.n < config.drift_min_rolls:
            continue
        spec_weights = {
            int(f): w for f, w in zip(spec.dice[i].faces, spec.dice[i].weights)
        }
        map_probs = dice_map_estimate(beliefs, i)
        kl = kl_divergence(map_probs, spec_weights)
        if kl > config.drift_kl_threshold:
            out.append(
                DeviationEvent(
                    path=f"dice.{i}.weights",
                    expected=spec_weights,
                    observed=map_probs,
                    game_index=game_index,
                    confidence=1.0 - math.exp(-die.n * kl),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Announcement gate
# ---------------------------------------------------------------------------


class NoveltyFlag:
    """Announces at the first deviation at or above the confidence
    threshold; at most one announcement per trial."""

    def __init__(self, threshold: float = 0.95) -> None:
        self.threshold = threshold
        self.announcement: int | None = None

    def offer(self, deviations: Iterable[DeviationEvent]) -> int | None:
        if self.announcement is not None:
            return self.announcement
        for dev in deviations:
            if dev.confidence >= self.threshold:
                self.announcement = dev.game_index
                break
        return self.announcement


class NoveltyDetector:
    """Bundles the tracker, dice beliefs, and the announcement gate for
    one agent across one trial. Drift checks run at game boundaries."""

    def __init__(self, board: BoardSpec, config: DetectorConfig = DetectorConfig()) -> None:
        self.config = config
        self.tracker = AttributeTracker(board)
        self.beliefs = DiceBeliefs(board.dice)
        self.flag = NoveltyFlag(threshold=config.announce_threshold)
        self.deviations: list[DeviationEvent] = []
        self._structure_reported: set[str] = set()

    @property
    def announcement(self) -> int | None:
        return self.flag.announcement

    def _ingest(self, deviations: list[DeviationEvent]) -> list[DeviationEvent]:
        fresh = []
        for dev in deviations:
            if dev.path.endswith(".weights"):
                # Drift confidence grows with evidence: keep the latest
                # estimate and keep offering it to the gate.
                self.deviations = [
                    d for d in self.deviations if d.path != dev.path
                ]
            elif dev.path.startswith("dice."):
                if dev.path in self._structure_reported:
                    continue
                self._structure_reported.add(dev.path)
            fresh.append(dev)
        self.deviations.extend(fresh)
        self.flag.offer(fresh)
        return fresh

    def observe_game_start(self, view: StateView, game_index: int) -> list[DeviationEvent]:
        return self._ingest(self.tracker.observe_state(view, game_index))

    def observe_event(self, event: dict[str, Any], game_index: int) -> list[DeviationEvent]:
        fresh: list[DeviationEvent] = []
        if event["kind"] == "roll":
            self.beliefs.observe_roll(event["payload"]["faces"])
            if self.beliefs.observed_die_count != len(self.tracker.baseline.dice.dice):
                fresh.extend(
                    self._ingest(
                        detect_dice_novelty(
                            self.beliefs,
                            self.tracker.baseline.dice,
                            game_index,
                            self.config,
                        )
                    )
                )
            return fresh
        return self._ingest(self.tracker.observe_outcome(event, game_index))

    def observe_game_end(self, game_index: int) -> list[DeviationEvent]:
        return self._ingest(
            detect_dice_novelty(
                self.beliefs, self.tracker.baseline.dice, game_index, self.config
            )
        )
