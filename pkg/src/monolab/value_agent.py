"""One-step-lookahead agent driven by a four-term state evaluation.

A candidate move is scored by simulating its direct effects and
evaluating the resulting holdings:

* asset value — prices of unmortgaged holdings plus improvements at
  build cost;
* short-term gain — expected rent received minus rent owed over the
  next few turns, using per-turn landing distributions from the dice
  model;
* long-term gain — the same exchange over full loops of the board,
  with landings spread uniformly (one landing per E[dice sum] squares);
* monopoly gain — the best scaled payoff from buying out and building
  up a color the agent already has a stake in.

Moves that would leave the agent exposed to bankruptcy are filtered out
first by two cash guards; the survivors go to an argmax over the
evaluation. All monetary inputs come from the agent's belief table, so
detected rule changes immediately reprice every decision.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

from .board import KIND_PROPERTY, BoardSpec
from .detection import DetectorConfig, DeviationEvent, NoveltyDetector
from .engine import (
    ACCEPT_TRADE,
    BID,
    BUY_PROPERTY,
    DECLINE_BUY,
    END_PHASE,
    IMPROVE,
    MORTGAGE,
    PASS_BID,
    PAY_JAIL_FINE,
    PHASE_PRE_ROLL,
    PROPOSE_TRADE,
    REJECT_TRADE,
    SELL_IMPROVEMENT,
    UNMORTGAGE,
    USE_ROLL_FOR_JAIL,
    Agent,
    Move,
    StateView,
    TradeOffer,
)

DiceRows = Sequence[tuple[Sequence[int], Sequence[float]]]

_KIND_PRIORITY = {
    BUY_PROPERTY: 0,
    UNMORTGAGE: 1,
    IMPROVE: 2,
    SELL_IMPROVEMENT: 3,
    MORTGAGE: 4,
    PROPOSE_TRADE: 5,
    PAY_JAIL_FINE: 6,
    USE_ROLL_FOR_JAIL: 7,
    ACCEPT_TRADE: 8,
    REJECT_TRADE: 9,
    BID: 10,
    PASS_BID: 11,
    DECLINE_BUY: 12,
    END_PHASE: 13,
}


@dataclass
class ValueParams:
    """Belief-parameterized inputs to the evaluation and the guards."""

    k_short: int = 5
    k_loops: int = 5
    cash_min: float = 200.0
    rent_expectations: dict[tuple[int, str], float] = field(default_factory=dict)
    go_increment_belief: float = 0.0
    mortgage_rate_belief: float = 0.0
    dice_model: Any = None  # None -> board dice; DiceBeliefs; or explicit rows

    @classmethod
    def from_board(cls, board: BoardSpec, **overrides: Any) -> "ValueParams":
        rents: dict[tuple[int, str], float] = {}
        for i, sq in enumerate(board.squares):
            if sq.kind == KIND_PROPERTY:
                for tier, rent in sq.rent_tiers():
                    rents[(i, tier)] = rent
        params = cls(
            rent_expectations=rents,
            go_increment_belief=board.go_increment,
            mortgage_rate_belief=board.mortgage_interest_rate,
        )
        return replace(params, **overrides) if overrides else params


@dataclass
class EvalState:
    """Holdings snapshot the evaluator scores; cheap to copy."""

    board: BoardSpec
    players: tuple[int, ...]
    positions: dict[int, int]
    cash: dict[int, float]
    ownership: dict[int, int]
    improvements: dict[int, int]
    mortgaged: set[int]
    _mono: dict[tuple[int, str], bool] = field(
        default_factory=dict, repr=False, compare=False
    )
    _rents: dict[int, float] = field(
        default_factory=dict, repr=False, compare=False
    )

    @classmethod
    def from_view(cls, view: StateView) -> "EvalState":
        solvent = view.solvent_ids
        return cls(
            board=view.board,
            players=solvent,
            positions={p: view.position_of(p) for p in solvent},
            cash={p: view.cash_of(p) for p in solvent},
            ownership=dict(view.ownership),
            improvements=dict(view.improvements),
            mortgaged=set(view.mortgaged),
        )

    def copy(self) -> "EvalState":
        return EvalState(
            board=self.board,
            players=self.players,
            positions=dict(self.positions),
            cash=dict(self.cash),
            ownership=dict(self.ownership),
            improvements=dict(self.improvements),
            mortgaged=set(self.mortgaged),
        )

    def owned_by(self, player: int) -> list[int]:
        return [sq for sq, owner in self.ownership.items() if owner == player]

    def has_monopoly(self, player: int, color: str) -> bool:
        key = (player, color)
        cached = self._mono.get(key)
        if cached is None:
            get = self.ownership.get
            owned = sum(
                1 for sq in self.board.color_members[color] if get(sq) == player
            )
            cached = owned >= self.board.required_for_monopoly(color)
            self._mono[key] = cached
        return cached


def _rent_of(state: EvalState, square: int, params: ValueParams) -> float:
    """Believed rent of an owned square at its current tier."""
    rent = state._rents.get(square)
    if rent is not None:
        return rent
    if square in state.mortgaged:
        rent = 0.0
    else:
        owner = state.ownership.get(square)
        if owner is None:
            rent = 0.0
        else:
            sq = state.board.squares[square]
            level = state.improvements.get(square, 0)
            monopoly = state.has_monopoly(owner, sq.color)
            rent = params.rent_expectations.get((square, sq.tier_at(level, monopoly)))
            if rent is None:
                rent = sq.rent_at(level, monopoly)
    state._rents[square] = rent
    return rent


def _dice_rows(board: BoardSpec, params: ValueParams | None) -> DiceRows:
    model = params.dice_model if params is not None else None
    if model is None:
        return [(d.faces, d.weights) for d in board.dice.dice]
    if hasattr(model, "to_dice_model"):
        rows = model.to_dice_model()
        if rows:
            return rows
        return [(d.faces, d.weights) for d in board.dice.dice]
    return model


# ---------------------------------------------------------------------------
# Landing probabilities
# ---------------------------------------------------------------------------


def _sum_kernel(rows: DiceRows, n: int) -> np.ndarray:
    """Distribution of (dice total mod n) as a length-n shift kernel."""
    totals = {0: 1.0}
    for faces, weights in rows:
        nxt: dict[int, float] = {}
        for t, p in totals.items():
            for f, w in zip(faces, weights):
                key = t + f
                nxt[key] = nxt.get(key, 0.0) + p * w
        totals = nxt
    kernel = np.zeros(n)
    for t, p in totals.items():
        kernel[t % n] += p
    return kernel


class LandingModel:
    """Cyclic dice-walk transition powers for one dice model.

    row(pos, k) gives the sum over turns 1..k of the landing
    distributions, so rent expectations collapse to one dot product.
    """

    def __init__(self, rows: DiceRows, n: int) -> None:
        kernel = _sum_kernel(rows, n)
        idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        self.step = kernel[idx]
        self.n = n
        self.rows = rows
        self.expected_sum = sum(
            sum(f * w for f, w in zip(faces, weights)) for faces, weights in rows
        )
        self.min_sum = sum(min(faces) for faces, _ in rows)
        self.max_sum = sum(max(faces) for faces, _ in rows)
        self._powers: list[np.ndarray] = [self.step]
        self._cumulative: dict[int, np.ndarray] = {1: self.step}
        self._row_lists: dict[tuple[int, int], list[float]] = {}
        self._turn1_lists: dict[int, list[float]] = {}
        self._summed: dict[tuple, list[float]] = {}

    def turn_matrix(self, t: int) -> np.ndarray:
        while len(self._powers) < t:
            self._powers.append(self._powers[-1] @ self.step)
        return self._powers[t - 1]

    def cumulative(self, k: int) -> np.ndarray:
        if k not in self._cumulative:
            total = self.turn_matrix(1).copy()
            for t in range(2, k + 1):
                total += self.turn_matrix(t)
            self._cumulative[k] = total
        return self._cumulative[k]

    def row(self, pos: int, k: int) -> list[float]:
        """Sum of turn 1..k landing rows as a plain list (fast lookups)."""
        key = (pos, k)
        cached = self._row_lists.get(key)
        if cached is None:
            cached = self.cumulative(k)[pos].tolist()
            self._row_lists[key] = cached
        return cached

    def turn_row(self, pos: int, t: int) -> np.ndarray:
        return self.turn_matrix(t)[pos]

    def turn1_row(self, pos: int) -> list[float]:
        cached = self._turn1_lists.get(pos)
        if cached is None:
            cached = self.step[pos].tolist()
            self._turn1_lists[pos] = cached
        return cached

    def summed_rows(self, positions: tuple[int, ...], k: int) -> list[float]:
        """Cumulative rows of several walkers, summed."""
        key = (positions, k)
        cached = self._summed.get(key)
        if cached is None:
            if len(positions) == 1:
                cached = self.row(positions[0], k)
            else:
                total = self.cumulative(k)[positions[0]].copy()
                for pos in positions[1:]:
                    total += self.cumulative(k)[pos]
                cached = total.tolist()
            self._summed[key] = cached
        return cached


def landing_prob(
    state: EvalState | StateView,
    player: int,
    k: int,
    dice_model: DiceRows | None = None,
) -> np.ndarray:
    """Per-turn landing distributions, shape (k, n); row t-1 is turn t.

    Pure dice-sum walk on the cyclic board: cards and jail are ignored.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    board = state.board
    rows = dice_model if dice_model is not None else [
        (d.faces, d.weights) for d in board.dice.dice
    ]
    model = LandingModel(rows, board.n)
    if isinstance(state, EvalState):
        pos = state.positions[player]
    else:
        pos = state.position_of(player)
    return np.stack([model.turn_row(pos, t) for t in range(1, k + 1)])


# ---------------------------------------------------------------------------
# Evaluation terms
# ---------------------------------------------------------------------------


def assets_value(state: EvalState, agent: int) -> float:
    """Unmortgaged property prices plus improvements at build cost."""
    total = 0.0
    for sq in state.owned_by(agent):
        if sq in state.mortgaged:
            continue
        spec = state.board.squares[sq]
        total += spec.price + state.improvements.get(sq, 0) * spec.house_cost
    return total


def _landing_model(state: EvalState, params: ValueParams) -> LandingModel:
    return LandingModel(_dice_rows(state.board, params), state.board.n)


def short_term_gain(
    state: EvalState,
    agent: int,
    k: int,
    params: ValueParams,
    model: LandingModel | None = None,
) -> float:
    """Expected rent received minus rent owed over the next k turns."""
    if model is None:
        model = _landing_model(state, params)
    opponents = [p for p in state.players if p != agent]
    if not opponents:
        return 0.0
    my_row = model.row(state.positions[agent], k)
    opp_positions = tuple(state.positions[opp] for opp in opponents)
    opp_total = model.summed_rows(opp_positions, k)
    total = 0.0
    positions = state.positions
    for sq, owner in state.ownership.items():
        rent = _rent_of(state, sq, params)
        if rent == 0.0:
            continue
        if owner == agent:
            total += opp_total[sq] * rent
        elif owner in positions:
            total -= my_row[sq] * rent
    return total


def long_term_gain(
    state: EvalState,
    agent: int,
    k_loops: int,
    params: ValueParams,
    model: LandingModel | None = None,
) -> float:
    """Rent exchange over k full loops at a uniform landing rate of
    1/E[dice sum] per square per loop."""
    if model is not None:
        expected_sum = model.expected_sum
    else:
        rows = _dice_rows(state.board, params)
        expected_sum = sum(
            sum(f * w for f, w in zip(faces, weights)) for faces, weights in rows
        )
    if expected_sum == 0:
        raise ValueError("degenerate dice: expected sum is zero")
    q = 1.0 / expected_sum
    opponents = [p for p in state.players if p != agent]
    if not opponents:
        return 0.0
    total = 0.0
    for sq, owner in state.ownership.items():
        rent = _rent_of(state, sq, params)
        if rent == 0.0:
            continue
        if owner == agent:
            total += len(opponents) * q * rent
        elif owner in state.positions:
            total -= q * rent
    return k_loops * total


def monopoly_gain(
    state: EvalState,
    agent: int,
    params: ValueParams,
    model: LandingModel | None = None,
    long_term: float | None = None,
) -> float:
    """Best scaled color payoff from hypothetically buying out and
    improving a color the agent already holds a piece of.

    Budget = cash + k * go bonus + long-term gain; buy every missing
    property of the color at list price, then improve greedily (cheapest
    house next, even build) until the budget runs out; scale the color's
    total rent down by 2 per missing property; take the max over colors.
    """
    board = state.board
    my_colors = sorted(
        {
            board.squares[sq].color
            for sq in state.owned_by(agent)
            if board.squares[sq].kind == KIND_PROPERTY
        }
    )
    if not my_colors:
        return 0.0
    if long_term is None:
        long_term = long_term_gain(state, agent, params.k_loops, params, model)
    budget_base = (
        state.cash[agent] + params.k_loops * params.go_increment_belief + long_term
    )
    best = 0.0
    for color in my_colors:
        members = board.color_members[color]
        owned_count = 0
        budget = budget_base
        levels: dict[int, int] = {}
        plan: list[tuple[int, float, int]] = []
        for sq in members:
            if state.ownership.get(sq) == agent:
                owned_count += 1
            else:
                budget -= board.squares[sq].price
            start = state.improvements.get(sq, 0)
            levels[sq] = start
            cost = board.squares[sq].house_cost
            for level in range(start + 1, board.squares[sq].max_level + 1):
                plan.append((level, cost, sq))
        # Cheapest-next even build: raise the lowest level first, break
        # cost ties by square index.
        plan.sort()
        for level, cost, sq in plan:
            if budget < cost:
                break
            budget -= cost
            levels[sq] = level
        color_rent = 0.0
        for sq in members:
            spec = board.squares[sq]
            rent = params.rent_expectations.get((sq, spec.tier_at(levels[sq], True)))
            if rent is None:
                rent = spec.rent_at(levels[sq], True)
            color_rent += rent
        scaled = color_rent / (2.0 ** (len(members) - owned_count))
        if scaled > best:
            best = scaled
    return best


def evaluate_state(
    state: EvalState,
    agent: int,
    params: ValueParams,
    model: LandingModel | None = None,
) -> float:
    """Linear combination of the four terms."""
    r_l = long_term_gain(state, agent, params.k_loops, params, model)
    return (
        assets_value(state, agent)
        + short_term_gain(state, agent, params.k_short, params, model)
        + r_l
        + monopoly_gain(state, agent, params, model, long_term=r_l)
    )


# ---------------------------------------------------------------------------
# Bankruptcy guards
# ---------------------------------------------------------------------------


def _rent_income_next_turn(
    state: EvalState, agent: int, params: ValueParams, model: LandingModel
) -> float:
    mine = state.owned_by(agent)
    if not mine:
        return 0.0
    total = 0.0
    for opp in state.players:
        if opp == agent:
            continue
        row = model.turn1_row(state.positions[opp])
        for sq in mine:
            rent = _rent_of(state, sq, params)
            if rent:
                total += row[sq] * rent
    return total


def _worst_rent_one_roll(
    state: EvalState,
    agent: int,
    params: ValueParams,
    model: LandingModel | None = None,
) -> float:
    if model is not None:
        lo, hi = model.min_sum, model.max_sum
    else:
        rows = _dice_rows(state.board, params)
        lo = sum(min(faces) for faces, _ in rows)
        hi = sum(max(faces) for faces, _ in rows)
    pos = state.positions[agent]
    worst = 0.0
    for steps in range(lo, hi + 1):
        sq = (pos + steps) % state.board.n
        owner = state.ownership.get(sq)
        if owner is not None and owner != agent:
            worst = max(worst, _rent_of(state, sq, params))
    return worst


def _liquidation_worth(state: EvalState, agent: int) -> float:
    total = 0.0
    for sq in state.owned_by(agent):
        spec = state.board.squares[sq]
        if sq not in state.mortgaged:
            total += spec.mortgage_value
        total += state.improvements.get(sq, 0) * spec.house_cost * 0.5
    return total


def _guard_terms(
    state: EvalState, agent: int, params: ValueParams, model: LandingModel
) -> tuple[float, float, float, float]:
    """Move-independent guard quantities for the current state."""
    r_next = short_term_gain(state, agent, 1, params, model)
    r_owed = _rent_income_next_turn(state, agent, params, model)
    worth = _liquidation_worth(state, agent)
    r_worst = _worst_rent_one_roll(state, agent, params, model)
    return r_next, r_owed, worth, r_worst


def _guards_hold(
    cash: float,
    cost: float,
    cash_min: float,
    terms: tuple[float, float, float, float],
) -> bool:
    r_next, r_owed, worth, r_worst = terms
    if cash + r_next - cost < cash_min:
        return False
    return cash + r_owed + worth - cost - r_worst > 0


def passes_guards(
    state: EvalState,
    agent: int,
    move: Move,
    params: ValueParams,
    model: LandingModel | None = None,
) -> bool:
    """Both cash-safety conditions must hold for the move.

    1. cash + expected net rent next turn - cost >= cash floor.
    2. cash + expected rent income next turn + forced-liquidation worth
       - cost - worst one-roll rent > 0.
    """
    if model is None:
        model = _landing_model(state, params)
    terms = _guard_terms(state, agent, params, model)
    return _guards_hold(state.cash[agent], move.cost, params.cash_min, terms)


# ---------------------------------------------------------------------------
# Move simulation and selection
# ---------------------------------------------------------------------------


def _inherit_memos(
    out: EvalState,
    src: EvalState,
    stale_squares: tuple[int, ...] = (),
    stale_colors: tuple[str, ...] = (),
) -> None:
    """Carry over cached rents/monopoly flags, dropping entries the move
    invalidated. Ownership changes stale a whole color; improvement and
    mortgage changes stale only the square itself."""
    rents = dict(src._rents)
    for sq in stale_squares:
        rents.pop(sq, None)
    if stale_colors:
        members = out.board.color_members
        for color in stale_colors:
            for sq in members[color]:
                rents.pop(sq, None)
        out._mono = {
            k: v for k, v in src._mono.items() if k[1] not in stale_colors
        }
    else:
        out._mono = dict(src._mono)
    out._rents = rents


def simulate_move(state: EvalState, agent: int, move: Move) -> EvalState:
    """Post-decision state: the move's direct effects only (no dice, no
    responses from other agents)."""
    out = state.copy()
    kind = move.kind
    board = state.board
    if kind == BUY_PROPERTY:
        out.cash[agent] -= move.cost
        out.ownership[move.square] = agent
        _inherit_memos(out, state, stale_colors=(board.squares[move.square].color,))
    elif kind == IMPROVE:
        out.cash[agent] -= move.cost
        out.improvements[move.square] = out.improvements.get(move.square, 0) + 1
        _inherit_memos(out, state, stale_squares=(move.square,))
    elif kind == SELL_IMPROVEMENT:
        spec = board.squares[move.square]
        out.cash[agent] += spec.house_cost * 0.5
        level = out.improvements.get(move.square, 0)
        if level > 1:
            out.improvements[move.square] = level - 1
        else:
            out.improvements.pop(move.square, None)
        _inherit_memos(out, state, stale_squares=(move.square,))
    elif kind == MORTGAGE:
        out.cash[agent] += board.squares[move.square].mortgage_value
        out.mortgaged.add(move.square)
        _inherit_memos(out, state, stale_squares=(move.square,))
    elif kind == UNMORTGAGE:
        out.cash[agent] -= move.cost
        out.mortgaged.discard(move.square)
        _inherit_memos(out, state, stale_squares=(move.square,))
    elif kind == PAY_JAIL_FINE:
        out.cash[agent] -= move.cost
        _inherit_memos(out, state)
    elif kind == BID and move.amount is not None:
        out.cash[agent] -= move.amount
        if move.square is not None:
            out.ownership[move.square] = agent
            _inherit_memos(
                out, state, stale_colors=(board.squares[move.square].color,)
            )
        else:
            _inherit_memos(out, state)
    elif kind in (PROPOSE_TRADE, ACCEPT_TRADE) and move.offer is not None:
        offer = move.offer
        out.ownership[offer.give_square] = offer.counterparty
        out.ownership[offer.get_square] = offer.proposer
        payer, payee = (
            (offer.proposer, offer.counterparty)
            if offer.cash >= 0
            else (offer.counterparty, offer.proposer)
        )
        if payer in out.cash:
            out.cash[payer] -= abs(offer.cash)
        if payee in out.cash:
            out.cash[payee] += abs(offer.cash)
        _inherit_memos(
            out,
            state,
            stale_colors=(
                board.squares[offer.give_square].color,
                board.squares[offer.get_square].color,
            ),
        )
    else:
        # decline_buy, end_phase, pass_bid, reject_trade,
        # use_roll_for_jail: identity on holdings.
        _inherit_memos(out, state)
    return out


def _move_sort_key(move: Move) -> tuple:
    return (
        _KIND_PRIORITY.get(move.kind, 99),
        move.square if move.square is not None else -1,
        move.amount if move.amount is not None else 0.0,
    )


def choose_move(
    state: EvalState,
    agent: int,
    legal: Sequence[Move],
    params: ValueParams,
    model: LandingModel | None = None,
) -> Move:
    """Guard-filtered argmax of the evaluation over simulated moves.

    If no move passes the guards, fall back to the zero-cost moves (the
    guards must never force an illegal state). Ties break on a fixed
    kind priority with decline/end last, then the lowest square index.
    """
    if not legal:
        raise ValueError("choose_move needs a non-empty legal set")
    if model is None:
        model = _landing_model(state, params)
    terms = _guard_terms(state, agent, params, model)
    cash = state.cash[agent]
    candidates = [
        m for m in legal if _guards_hold(cash, m.cost, params.cash_min, terms)
    ]
    if not candidates:
        zero_cost = [m for m in legal if m.cost == 0]
        candidates = zero_cost or sorted(legal, key=lambda m: m.cost)[:1]
    best_move = None
    best_value = None
    for move in sorted(candidates, key=_move_sort_key):
        value = evaluate_state(simulate_move(state, agent, move), agent, params, model)
        if best_value is None or value > best_value:
            best_value = value
            best_move = move
    return best_move


def adapt_params(
    params: ValueParams, detections: Iterable[DeviationEvent]
) -> ValueParams:
    """Fold detected attribute deviations into the belief table."""
    rents = None
    go = params.go_increment_belief
    rate = params.mortgage_rate_belief
    for dev in detections:
        parts = dev.path.split(".")
        if parts[0] == "rent" and len(parts) == 3:
            if rents is None:
                rents = dict(params.rent_expectations)
            rents[(int(parts[1]), parts[2])] = float(dev.observed)
        elif dev.path == "go_increment":
            go = float(dev.observed)
        elif dev.path == "mortgage_rate" and dev.observed is not None:
            rate = float(dev.observed)
    if rents is None and go == params.go_increment_belief and rate == params.mortgage_rate_belief:
        return params
    return replace(
        params,
        rent_expectations=rents if rents is not None else params.rent_expectations,
        go_increment_belief=go,
        mortgage_rate_belief=rate,
    )


# ---------------------------------------------------------------------------
# The agent
# ---------------------------------------------------------------------------


class ValueAgent(Agent):
    """Plays the guard-filtered one-step argmax policy and runs the
    novelty detectors across a trial."""

    def __init__(
        self,
        seat: int,
        seed: int = 0,
        k_short: int = 5,
        k_loops: int = 5,
        cash_min: float = 200.0,
        detector: DetectorConfig | None = None,
        trace_file: str | None = None,
    ) -> None:
        self.seat = seat
        self.seed = seed
        self._overrides = {
            "k_short": k_short,
            "k_loops": k_loops,
            "cash_min": cash_min,
        }
        self.detector_config = detector or DetectorConfig()
        self.params: ValueParams | None = None
        self.detector: NoveltyDetector | None = None
        self.trace_file = trace_file
        self._game_index = 0
        self._phase_key: tuple | None = None
        self._proposed_trade = False
        self._model_cache: tuple[tuple, LandingModel] | None = None

    @property
    def detection(self) -> int | None:
        return self.detector.announcement if self.detector else None

    # -- detector plumbing --------------------------------------------------

    def on_game_start(self, view: StateView, game_index: int) -> None:
        self._game_index = game_index
        if self.detector is None:
            self.detector = NoveltyDetector(view.board, self.detector_config)
            self.params = ValueParams.from_board(view.board, **self._overrides)
            self.params.dice_model = self.detector.beliefs
        self._apply(self.detector.observe_game_start(view, game_index))

    def on_event(self, event: dict[str, Any]) -> None:
        if self.detector is None:
            return
        self._apply(self.detector.observe_event(event, self._game_index))
        if event["kind"] == "roll":
            self._model_cache = None

    def on_game_end(self, view: StateView, game_index: int) -> None:
        if self.detector is not None:
            self._apply(self.detector.observe_game_end(game_index))

    def _apply(self, deviations: list[DeviationEvent]) -> None:
        if deviations and self.params is not None:
            self.params = adapt_params(self.params, deviations)
            self.params.dice_model = self.detector.beliefs
            self._model_cache = None

    # -- decisions ----------------------------------------------------------

    def _ensure_params(self, view: StateView) -> ValueParams:
        if self.params is None:
            self.params = ValueParams.from_board(view.board, **self._overrides)
        return self.params

    def _model_for(self, state: EvalState, params: ValueParams) -> LandingModel:
        key = (state.board.n,)
        if self._model_cache is not None and self._model_cache[0] == key:
            return self._model_cache[1]
        model = LandingModel(_dice_rows(state.board, params), state.board.n)
        self._model_cache = (key, model)
        return model

    def decide(self, view: StateView, legal: tuple[Move, ...]) -> Move:
        params = self._ensure_params(view)
        if len(legal) == 1:
            return legal[0]
        state = EvalState.from_view(view)
        model = self._model_for(state, params)

        phase_key = (view.round, view.current_player, view.phase)
        if phase_key != self._phase_key:
            self._phase_key = phase_key
            self._proposed_trade = False
        if view.phase == PHASE_PRE_ROLL and not self._proposed_trade:
            offer = self._find_completion_trade(state, params, model)
            if offer is not None:
                self._proposed_trade = True
                return Move(
                    PROPOSE_TRADE, offer=offer, cost=max(offer.cash, 0.0)
                )

        move = choose_move(state, self.seat, legal, params, model)
        if self.trace_file:
            self._trace(state, legal, move, params, model)
        return move

    def bid(self, view: StateView, square: int, min_next: float) -> Move:
        params = self._ensure_params(view)
        if min_next > view.cash_of(self.seat):
            return Move.pass_bid()
        state = EvalState.from_view(view)
        model = self._model_for(state, params)
        base = evaluate_state(state, self.seat, params, model)
        owned = state.copy()
        owned.ownership[square] = self.seat
        gain = evaluate_state(owned, self.seat, params, model) - base
        if min_next > gain:
            return Move.pass_bid()
        probe = Move(BID, square=square, amount=min_next, cost=min_next)
        if not passes_guards(state, self.seat, probe, params, model):
            return Move.pass_bid()
        return Move.bid(min_next)

    def respond_trade(self, view: StateView, offer: TradeOffer) -> Move:
        params = self._ensure_params(view)
        state = EvalState.from_view(view)
        board = state.board
        gained, lost = offer.give_square, offer.get_square
        color_gained = board.squares[gained].color
        after = state.copy()
        after.ownership[gained] = self.seat
        after.ownership[lost] = offer.proposer
        if not after.has_monopoly(self.seat, color_gained):
            return Move(REJECT_TRADE)
        if after.has_monopoly(offer.proposer, board.squares[lost].color):
            return Move(REJECT_TRADE)
        cost = max(-offer.cash, 0.0)  # counterparty pays when cash < 0
        probe = Move(ACCEPT_TRADE, offer=offer, cost=cost)
        model = self._model_for(state, params)
        if not passes_guards(state, self.seat, probe, params, model):
            return Move(REJECT_TRADE)
        return Move(ACCEPT_TRADE)

    def _find_completion_trade(
        self, state: EvalState, params: ValueParams, model: LandingModel
    ) -> TradeOffer | None:
        board = state.board
        mine = sorted(state.owned_by(self.seat))
        for color in sorted(board.colors):
            members = board.colors[color]
            required = board.required_for_monopoly(color)
            owned = [sq for sq in members if state.ownership.get(sq) == self.seat]
            if len(owned) != required - 1:
                continue
            if any(state.improvements.get(sq, 0) for sq in members):
                continue
            targets = sorted(
                sq
                for sq in members
                if state.ownership.get(sq) not in (None, self.seat)
                and sq not in state.mortgaged
            )
            for get_sq in targets:
                counterparty = state.ownership[get_sq]
                for give_sq in mine:
                    if board.squares[give_sq].color == color:
                        continue
                    if give_sq in state.mortgaged:
                        continue
                    give_color = board.squares[give_sq].color
                    if any(
                        state.improvements.get(sq, 0)
                        for sq in board.colors[give_color]
                    ):
                        continue
                    after_count = 1 + sum(
                        1
                        for sq in board.colors[give_color]
                        if state.ownership.get(sq) == counterparty
                    )
                    if after_count >= board.required_for_monopoly(give_color):
                        continue
                    cash = max(
                        0.0,
                        board.squares[get_sq].price - board.squares[give_sq].price,
                    )
                    if cash > state.cash[self.seat]:
                        continue
                    probe = Move(
                        PROPOSE_TRADE,
                        offer=TradeOffer(
                            proposer=self.seat,
                            counterparty=counterparty,
                            give_square=give_sq,
                            get_square=get_sq,
                            cash=cash,
                        ),
                        cost=cash,
                    )
                    if passes_guards(state, self.seat, probe, params, model):
                        return probe.offer
        return None

    def _trace(
        self,
        state: EvalState,
        legal: tuple[Move, ...],
        chosen: Move,
        params: ValueParams,
        model: LandingModel,
    ) -> None:
        entry = {
            "game": self._game_index,
            "seat": self.seat,
            "chosen": chosen.kind,
            "chosen_square": chosen.square,
            "candidates": [
                {
                    "move": m.kind,
                    "square": m.square,
                    "cost": m.cost,
                    "guards": passes_guards(state, self.seat, m, params, model),
                    "value": evaluate_state(
                        simulate_move(state, self.seat, m), self.seat, params, model
                    ),
                }
                for m in legal
            ],
        }
        with open(self.trace_file, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")
