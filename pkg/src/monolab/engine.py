"""Game engine: turn loop, dice, cards, rent, auctions, mortgages,
improvements, and bankruptcy resolution.

The ruleset implemented here is normative for the whole package:

* a declined purchase goes to an English ascending auction;
* mortgaged properties collect no rent;
* jail exit is pay-the-fine, or roll-for-doubles for up to three turns
  when the board has at least two dice (single-die boards: fine only);
* there is no Free Parking jackpot;
* improvements sell back to the bank at half their build cost;
* every turn is: a pre-roll round in which every solvent player may act
  (improve / mortgage / trade), the roll, landing resolution with
  buy-or-auction, then a post-roll decision phase for the roller.

All stochasticity flows through one `random.Random` stream per game, so
a game is a pure function of (agents, board, novelty, seed, max_rounds)
and replays produce byte-identical event logs.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .board import (
    KIND_CHANCE,
    KIND_COMMUNITY,
    KIND_GO_TO_JAIL,
    KIND_PROPERTY,
    KIND_TAX,
    BoardSpec,
    CardSpec,
)

BANK = "bank"

# Move kinds
BUY_PROPERTY = "buy_property"
DECLINE_BUY = "decline_buy"
IMPROVE = "improve"
SELL_IMPROVEMENT = "sell_improvement"
MORTGAGE = "mortgage"
UNMORTGAGE = "unmortgage"
BID = "bid"
PASS_BID = "pass_bid"
PROPOSE_TRADE = "propose_trade"
ACCEPT_TRADE = "accept_trade"
REJECT_TRADE = "reject_trade"
PAY_JAIL_FINE = "pay_jail_fine"
USE_ROLL_FOR_JAIL = "use_roll_for_jail"
END_PHASE = "end_phase"

PHASE_PRE_ROLL = "pre_roll"
PHASE_BUY = "buy"
PHASE_POST_ROLL = "post_roll"
PHASE_AUCTION = "auction"


class IllegalMoveError(RuntimeError):
    """An agent returned a move the rules do not permit (caller bug)."""


@dataclass(frozen=True)
class TradeOffer:
    """1-for-1 property swap with an optional cash sweetener.

    ``cash`` > 0 means the proposer pays the counterparty; < 0 means the
    counterparty pays the proposer.
    """

    proposer: int
    counterparty: int
    give_square: int
    get_square: int
    cash: float = 0.0


@dataclass(frozen=True)
class Move:
    kind: str
    square: int | None = None
    amount: float | None = None
    offer: TradeOffer | None = None
    cost: float = 0.0

    @staticmethod
    def end_phase() -> "Move":
        return Move(END_PHASE)

    @staticmethod
    def decline() -> "Move":
        return Move(DECLINE_BUY)

    @staticmethod
    def bid(amount: float) -> "Move":
        return Move(BID, amount=amount, cost=amount)

    @staticmethod
    def pass_bid() -> "Move":
        return Move(PASS_BID)


@dataclass(slots=True)
class PlayerState:
    id: int
    position: int = 0
    cash: float = 0.0
    in_jail: bool = False
    jail_turns: int = 0
    bankrupt: bool = False


@dataclass(frozen=True)
class EngineRules:
    starting_cash: float = 1500.0
    auction_start_price: float = 10.0
    auction_increment: float = 10.0
    jail_fine: float = 50.0
    jail_max_turns: int = 3
    improvement_resale_factor: float = 0.5
    max_actions_per_phase: int = 20
    card_chain_limit: int = 4


DEFAULT_RULES = EngineRules()


class GameState:
    """Full mutable game situation, confined to one game execution."""

    __slots__ = (
        "board",
        "rules",
        "players",
        "ownership",
        "improvements",
        "mortgaged",
        "turn",
        "phase",
        "current_player",
        "pending_square",
        "chance_cursor",
        "community_cursor",
        "houses_out",
        "hotels_out",
        "bank_flow",
        "rng",
    )

    def __init__(
        self,
        board: BoardSpec,
        n_players: int,
        seed: int,
        rules: EngineRules = DEFAULT_RULES,
    ) -> None:
        if not 2 <= n_players <= 4:
            raise ValueError(f"need 2..4 players, got {n_players}")
        self.board = board
        self.rules = rules
        self.players = [
            PlayerState(id=i, cash=rules.starting_cash) for i in range(n_players)
        ]
        self.ownership: dict[int, int] = {}
        self.improvements: dict[int, int] = {}
        self.mortgaged: set[int] = set()
        self.turn = 0
        self.phase = PHASE_PRE_ROLL
        self.current_player = 0
        self.pending_square: int | None = None
        self.chance_cursor = 0
        self.community_cursor = 0
        self.houses_out = 0
        self.hotels_out = 0
        # Net cash the bank has paid out; the bank is a ledger, not a pool.
        self.bank_flow = 0.0
        self.rng = random.Random(seed)

    # -- queries ------------------------------------------------------------

    def solvent_players(self) -> list[PlayerState]:
        return [p for p in self.players if not p.bankrupt]

    def owner_of(self, square: int) -> int | None:
        return self.ownership.get(square)

    def level_of(self, square: int) -> int:
        return self.improvements.get(square, 0)

    def owned_in_color(self, player: int, color: str) -> list[int]:
        return [
            sq for sq in self.board.colors[color] if self.ownership.get(sq) == player
        ]

    def has_monopoly(self, player: int, color: str) -> bool:
        owned = sum(
            1 for sq in self.board.colors[color] if self.ownership.get(sq) == player
        )
        return owned >= self.board.required_for_monopoly(color)

    def rent_due(self, square: int) -> float:
        """Current rent of an owned square; 0 while mortgaged."""
        if square in self.mortgaged:
            return 0.0
        owner = self.ownership.get(square)
        if owner is None:
            return 0.0
        sq = self.board.squares[square]
        return sq.rent_at(self.level_of(square), self.has_monopoly(owner, sq.color))

    def net_worth(self, player: int) -> float:
        """Cash plus unmortgaged asset value (improvements at build cost)."""
        p = self.players[player]
        total = p.cash
        for sq, owner in self.ownership.items():
            if owner != player or sq in self.mortgaged:
                continue
            spec = self.board.squares[sq]
            total += spec.price + self.level_of(sq) * spec.house_cost
        return total

    def digest(self) -> str:
        body = json.dumps(
            {
                "positions": [p.position for p in self.players],
                "cash": [p.cash for p in self.players],
                "bankrupt": [p.bankrupt for p in self.players],
                "ownership": sorted(self.ownership.items()),
                "improvements": sorted(self.improvements.items()),
                "mortgaged": sorted(self.mortgaged),
                "turn": self.turn,
            },
            sort_keys=True,
        )
        return hashlib.sha256(body.encode()).hexdigest()


@dataclass(frozen=True)
class GameResult:
    winner: int | None
    rounds: int
    digest: str
    events: tuple[dict[str, Any], ...]


# ---------------------------------------------------------------------------
# Legal moves
# ---------------------------------------------------------------------------


def _can_improve(state: GameState, player: int, square: int) -> bool:
    board = state.board
    sq = board.squares[square]
    if state.ownership.get(square) != player or square in state.mortgaged:
        return False
    if not state.has_monopoly(player, sq.color):
        return False
    owned = state.owned_in_color(player, sq.color)
    if any(s in state.mortgaged for s in owned):
        return False
    level = state.level_of(square)
    if level >= sq.max_level:
        return False
    if level > min(state.level_of(s) for s in owned):
        return False  # even-build: raise the lowest squares first
    next_is_hotel = level + 1 > len(sq.house_rents)
    if next_is_hotel:
        return state.hotels_out < board.bank_hotels
    return state.houses_out < board.bank_houses


def _can_sell_improvement(state: GameState, player: int, square: int) -> bool:
    if state.ownership.get(square) != player:
        return False
    level = state.level_of(square)
    if level <= 0:
        return False
    color = state.board.squares[square].color
    owned = state.owned_in_color(player, color)
    return level >= max(state.level_of(s) for s in owned)


def _can_mortgage(state: GameState, player: int, square: int) -> bool:
    if state.ownership.get(square) != player or square in state.mortgaged:
        return False
    color = state.board.squares[square].color
    owned = state.owned_in_color(player, color)
    return all(state.level_of(s) == 0 for s in owned)


def legal_moves(state: GameState, player: int) -> tuple[Move, ...]:
    """Moves the ruleset permits for `player` in the current phase.

    Trade proposals are agent-constructed (the cash sweetener makes the
    space unbounded) and validated on application; they are not
    enumerated here.
    """
    p = state.players[player]
    if p.bankrupt:
        return ()

    if state.phase == PHASE_BUY and player == state.current_player:
        price = state.board.squares[state.pending_square].price
        return (
            Move(BUY_PROPERTY, square=state.pending_square, cost=price),
            Move.decline(),
        )

    moves: list[Move] = []
    board = state.board
    squares = board.squares
    owned_by_color: dict[str, list[int]] = {}
    for sq, owner in state.ownership.items():
        if owner == player:
            owned_by_color.setdefault(squares[sq].color, []).append(sq)
    for color in sorted(owned_by_color):
        owned = sorted(owned_by_color[color])
        monopoly = len(owned) >= board.required_for_monopoly(color)
        levels = [state.improvements.get(s, 0) for s in owned]
        min_level = min(levels)
        max_level = max(levels)
        none_mortgaged = not any(s in state.mortgaged for s in owned)
        for sq, level in zip(owned, levels):
            spec = squares[sq]
            if (
                monopoly
                and none_mortgaged
                and level == min_level
                and level < spec.max_level
            ):
                next_is_hotel = level + 1 > len(spec.house_rents)
                stock_ok = (
                    state.hotels_out < board.bank_hotels
                    if next_is_hotel
                    else state.houses_out < board.bank_houses
                )
                if stock_ok:
                    moves.append(Move(IMPROVE, square=sq, cost=spec.house_cost))
            if level > 0 and level == max_level:
                moves.append(Move(SELL_IMPROVEMENT, square=sq))
            if sq in state.mortgaged:
                moves.append(
                    Move(UNMORTGAGE, square=sq, cost=board.unmortgage_cost(sq))
                )
            elif max_level == 0:
                moves.append(Move(MORTGAGE, square=sq))
    moves.append(Move.end_phase())
    return tuple(moves)


def jail_moves(state: GameState, player: int) -> tuple[Move, ...]:
    moves = [Move(PAY_JAIL_FINE, cost=state.rules.jail_fine)]
    if len(state.board.dice.dice) >= 2:
        moves.append(Move(USE_ROLL_FOR_JAIL))
    return tuple(moves)


# ---------------------------------------------------------------------------
# Events and money movement
# ---------------------------------------------------------------------------


def _event(
    state: GameState,
    kind: str,
    player: int | None = None,
    **payload: Any,
) -> dict[str, Any]:
    return {"round": state.turn, "kind": kind, "player": player, "payload": payload}


def _transfer(
    state: GameState,
    payload: dict[str, Any],
    payer: int | str,
    payee: int | str,
    amount: float,
) -> None:
    """Move `amount` from payer to payee, recording deltas in the payload."""
    deltas: dict[str, float] = payload.setdefault("cash", {})
    for party, sign in ((payer, -1.0), (payee, 1.0)):
        delta = sign * amount
        if party == BANK:
            state.bank_flow += delta
            deltas[BANK] = deltas.get(BANK, 0.0) + delta
        else:
            state.players[party].cash += delta
            key = str(party)
            deltas[key] = deltas.get(key, 0.0) + delta


# ---------------------------------------------------------------------------
# Core transitions
# ---------------------------------------------------------------------------


def apply_move(
    state: GameState,
    player: int,
    move: Move,
    agents: Sequence["Agent"] | None = None,
) -> list[dict[str, Any]]:
    """Apply a decision-phase move. Raises IllegalMoveError on a bad move."""
    events: list[dict[str, Any]] = []
    kind = move.kind

    if kind == END_PHASE:
        return events

    if kind == BUY_PROPERTY:
        if state.phase != PHASE_BUY or state.pending_square is None:
            raise IllegalMoveError("no purchase pending")
        sq = state.pending_square
        price = state.board.squares[sq].price
        ev = _event(state, "purchase", player, square=sq, price=price)
        _transfer(state, ev["payload"], player, BANK, price)
        state.ownership[sq] = player
        state.pending_square = None
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
        return events

    if kind == DECLINE_BUY:
        if state.phase != PHASE_BUY or state.pending_square is None:
            raise IllegalMoveError("no purchase pending")
        return events

    if kind == IMPROVE:
        if not _can_improve(state, player, move.square):
            raise IllegalMoveError(f"cannot improve square {move.square}")
        spec = state.board.squares[move.square]
        level = state.level_of(move.square) + 1
        if level > len(spec.house_rents):
            state.hotels_out += 1
            state.houses_out -= level - 1
        else:
            state.houses_out += 1
        state.improvements[move.square] = level
        ev = _event(
            state, "improvement", player, square=move.square, level=level,
            price=spec.house_cost,
        )
        _transfer(state, ev["payload"], player, BANK, spec.house_cost)
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
        return events

    if kind == SELL_IMPROVEMENT:
        if not _can_sell_improvement(state, player, move.square):
            raise IllegalMoveError(f"cannot sell improvement on {move.square}")
        events.append(_sell_one_improvement(state, player, move.square))
        return events

    if kind == MORTGAGE:
        if not _can_mortgage(state, player, move.square):
            raise IllegalMoveError(f"cannot mortgage square {move.square}")
        events.append(_mortgage_square(state, player, move.square))
        return events

    if kind == UNMORTGAGE:
        if (
            state.ownership.get(move.square) != player
            or move.square not in state.mortgaged
        ):
            raise IllegalMoveError(f"cannot unmortgage square {move.square}")
        cost = state.board.unmortgage_cost(move.square)
        state.mortgaged.discard(move.square)
        ev = _event(
            state, "unmortgage", player, square=move.square, price=cost,
            principal=state.board.squares[move.square].mortgage_value,
        )
        _transfer(state, ev["payload"], player, BANK, cost)
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
        return events

    if kind == PROPOSE_TRADE:
        return _route_trade(state, player, move.offer, agents)

    raise IllegalMoveError(f"move kind {kind!r} not applicable here")


def _mortgage_square(state: GameState, player: int, square: int) -> dict[str, Any]:
    mv = state.board.squares[square].mortgage_value
    state.mortgaged.add(square)
    ev = _event(state, "mortgage", player, square=square, value=mv)
    _transfer(state, ev["payload"], BANK, player, mv)
    return ev


def _sell_one_improvement(
    state: GameState, player: int, square: int
) -> dict[str, Any]:
    spec = state.board.squares[square]
    level = state.level_of(square)
    refund = spec.house_cost * state.rules.improvement_resale_factor
    if level > len(spec.house_rents):
        state.hotels_out -= 1
        state.houses_out += level - 1
    else:
        state.houses_out -= 1
    if level - 1 > 0:
        state.improvements[square] = level - 1
    else:
        state.improvements.pop(square, None)
    ev = _event(
        state, "sell_improvement", player, square=square, level=level - 1,
        refund=refund,
    )
    _transfer(state, ev["payload"], BANK, player, refund)
    return ev


def validate_trade(state: GameState, offer: TradeOffer) -> str | None:
    """Return None if the offer is applicable, else a reason string."""
    board = state.board
    for pid in (offer.proposer, offer.counterparty):
        if not 0 <= pid < len(state.players) or state.players[pid].bankrupt:
            return f"player {pid} cannot trade"
    if offer.proposer == offer.counterparty:
        return "cannot trade with yourself"
    for sq, owner in (
        (offer.give_square, offer.proposer),
        (offer.get_square, offer.counterparty),
    ):
        if board.squares[sq].kind != KIND_PROPERTY:
            return f"square {sq} is not a property"
        if state.ownership.get(sq) != owner:
            return f"square {sq} not owned by player {owner}"
        if sq in state.mortgaged:
            return f"square {sq} is mortgaged"
        color = board.squares[sq].color
        if any(state.level_of(s) > 0 for s in board.colors[color]):
            return f"color {color} has improvements"
    payer = offer.proposer if offer.cash > 0 else offer.counterparty
    if abs(offer.cash) > state.players[payer].cash:
        return "cash sweetener exceeds payer's cash"
    return None


def _route_trade(
    state: GameState,
    player: int,
    offer: TradeOffer | None,
    agents: Sequence["Agent"] | None,
) -> list[dict[str, Any]]:
    if offer is None or offer.proposer != player:
        raise IllegalMoveError("malformed trade proposal")
    reason = validate_trade(state, offer)
    if reason is not None:
        raise IllegalMoveError(f"invalid trade: {reason}")
    accepted = False
    if agents is not None:
        view = StateView(state)
        response = _agent_call(
            agents[offer.counterparty], "respond_trade", view, offer
        )
        accepted = response is not None and response.kind == ACCEPT_TRADE
    ev = _event(
        state,
        "trade",
        player,
        counterparty=offer.counterparty,
        give_square=offer.give_square,
        get_square=offer.get_square,
        trade_cash=offer.cash,
        accepted=accepted,
    )
    if accepted:
        state.ownership[offer.give_square] = offer.counterparty
        state.ownership[offer.get_square] = offer.proposer
        if offer.cash > 0:
            _transfer(state, ev["payload"], offer.proposer, offer.counterparty, offer.cash)
        elif offer.cash < 0:
            _transfer(state, ev["payload"], offer.counterparty, offer.proposer, -offer.cash)
    return [ev]


# ---------------------------------------------------------------------------
# Dice, movement, landing
# ---------------------------------------------------------------------------


def _roll_die(rng: random.Random, faces: Sequence[int], weights: Sequence[float]) -> int:
    x = rng.random()
    acc = 0.0
    for f, w in zip(faces, weights):
        acc += w
        if x < acc:
            return f
    return faces[-1]


def roll_dice(state: GameState) -> list[int]:
    return [
        _roll_die(state.rng, d.faces, d.weights) for d in state.board.dice.dice
    ]


def _advance(
    state: GameState,
    player: int,
    steps: int,
    events: list[dict[str, Any]],
) -> None:
    """Move forward `steps`, granting the Go bonus on wrap."""
    p = state.players[player]
    raw = p.position + steps
    p.position = raw % state.board.n
    if raw >= state.board.n:
        ev = _event(
            state, "go_bonus", player, amount=state.board.go_increment
        )
        _transfer(state, ev["payload"], BANK, player, state.board.go_increment)
        events.append(ev)


def roll_and_advance(state: GameState, player: int) -> list[dict[str, Any]]:
    events: list[dict[str, Any]] = []
    faces = roll_dice(state)
    events.append(_event(state, "roll", player, faces=faces, total=sum(faces)))
    _advance(state, player, sum(faces), events)
    events.append(
        _event(state, "landed", player, square=state.players[player].position)
    )
    return events


def resolve_landing(
    state: GameState,
    player: int,
    agents: Sequence["Agent"] | None = None,
    _chain: int = 0,
) -> list[dict[str, Any]]:
    """Resolve the square the player is standing on.

    May leave the game in the buy phase (pending_square set) when the
    player stops on an unowned property.
    """
    events: list[dict[str, Any]] = []
    pos = state.players[player].position
    sq = state.board.squares[pos]

    if sq.kind == KIND_PROPERTY:
        owner = state.ownership.get(pos)
        if owner is None:
            state.phase = PHASE_BUY
            state.pending_square = pos
        elif owner != player and pos not in state.mortgaged:
            rent = state.rent_due(pos)
            if rent > 0:
                ev = _event(state, "rent_paid", player, square=pos, rent=rent, owner=owner)
                _transfer(state, ev["payload"], player, owner, rent)
                events.append(ev)
                _settle_if_negative(state, player, owner, events, agents)
        return events

    if sq.kind == KIND_TAX:
        ev = _event(state, "tax_paid", player, square=pos, amount=sq.tax_amount)
        _transfer(state, ev["payload"], player, BANK, sq.tax_amount)
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
        return events

    if sq.kind in (KIND_CHANCE, KIND_COMMUNITY):
        return _draw_card(state, player, sq.kind, agents, _chain)

    if sq.kind == KIND_GO_TO_JAIL:
        _send_to_jail(state, player, events)
        return events

    return events  # go / free-parking / jail-visit are inert


def _send_to_jail(
    state: GameState, player: int, events: list[dict[str, Any]]
) -> None:
    jail = state.board.jail_square()
    p = state.players[player]
    p.position = jail
    p.in_jail = True
    p.jail_turns = 0
    events.append(_event(state, "jail", player, action="enter", square=jail))


def _draw_card(
    state: GameState,
    player: int,
    deck_kind: str,
    agents: Sequence["Agent"] | None,
    chain: int,
) -> list[dict[str, Any]]:
    events: list[dict[str, Any]] = []
    if deck_kind == KIND_CHANCE:
        deck, cursor_attr = state.board.chance_deck, "chance_cursor"
    else:
        deck, cursor_attr = state.board.community_deck, "community_cursor"
    if not deck:
        return events
    cursor = getattr(state, cursor_attr)
    card: CardSpec = deck[cursor % len(deck)]
    setattr(state, cursor_attr, (cursor + 1) % len(deck))

    ev = _event(
        state,
        "card_drawn",
        player,
        deck="chance" if deck_kind == KIND_CHANCE else "community",
        index=cursor % len(deck),
        effect=card.effect,
        text=card.text,
    )
    if card.effect == "pay":
        ev["payload"]["amount"] = card.amount
        _transfer(state, ev["payload"], player, BANK, card.amount)
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
    elif card.effect == "receive":
        ev["payload"]["amount"] = card.amount
        _transfer(state, ev["payload"], BANK, player, card.amount)
        events.append(ev)
    elif card.effect == "pay-per-house":
        houses = hotels = 0
        for sq, owner in state.ownership.items():
            if owner != player:
                continue
            level = state.level_of(sq)
            if level > len(state.board.squares[sq].house_rents):
                hotels += 1
            else:
                houses += level
        due = houses * card.amount + hotels * (card.hotel_amount or 0.0)
        ev["payload"]["amount"] = due
        ev["payload"]["houses"] = houses
        ev["payload"]["hotels"] = hotels
        if due > 0:
            _transfer(state, ev["payload"], player, BANK, due)
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
    elif card.effect == "go-to-jail":
        events.append(ev)
        _send_to_jail(state, player, events)
    elif card.effect == "move-to":
        ev["payload"]["square"] = card.square
        events.append(ev)
        steps = (card.square - state.players[player].position) % state.board.n
        _advance(state, player, steps, events)
        events.append(_event(state, "landed", player, square=card.square))
        if chain < state.rules.card_chain_limit:
            events.extend(resolve_landing(state, player, agents, chain + 1))
    return events


# ---------------------------------------------------------------------------
# Debt, liquidation, bankruptcy
# ---------------------------------------------------------------------------


def _settle_if_negative(
    state: GameState,
    debtor: int,
    creditor: int | str,
    events: list[dict[str, Any]],
    agents: Sequence["Agent"] | None,
) -> None:
    p = state.players[debtor]
    if p.cash >= 0 or p.bankrupt:
        return
    force_liquidate(state, debtor, events)
    if p.cash < 0:
        events.extend(resolve_bankruptcy(state, debtor, creditor, agents))


def force_liquidate(
    state: GameState, debtor: int, events: list[dict[str, Any]]
) -> None:
    """Auto-sell improvements (highest level first), then auto-mortgage
    (ascending square index), stopping as soon as cash is non-negative."""
    p = state.players[debtor]
    while p.cash < 0:
        improved = [
            (level, sq)
            for sq, level in state.improvements.items()
            if state.ownership.get(sq) == debtor and level > 0
        ]
        if not improved:
            break
        level, sq = max(improved, key=lambda t: (t[0], -t[1]))
        events.append(_sell_one_improvement(state, debtor, sq))
    for sq in sorted(state.ownership):
        if p.cash >= 0:
            break
        if state.ownership[sq] == debtor and sq not in state.mortgaged:
            events.append(_mortgage_square(state, debtor, sq))


def resolve_bankruptcy(
    state: GameState,
    debtor: int,
    creditor: int | str,
    agents: Sequence["Agent"] | None = None,
) -> list[dict[str, Any]]:
    """Transfer the debtor's remaining assets and remove it from play.

    The creditor absorbs the uncovered shortfall, so the net transfer is
    exactly what the debtor could raise.
    """
    events: list[dict[str, Any]] = []
    p = state.players[debtor]
    shortfall = -p.cash if p.cash < 0 else 0.0
    ev = _event(
        state,
        "bankruptcy",
        debtor,
        creditor=creditor if creditor == BANK else int(creditor),
        shortfall=shortfall,
    )
    if shortfall > 0:
        _transfer(state, ev["payload"], creditor, debtor, shortfall)
    p.bankrupt = True
    squares = sorted(sq for sq, owner in state.ownership.items() if owner == debtor)
    ev["payload"]["squares"] = squares
    events.append(ev)

    if creditor == BANK:
        for sq in squares:
            del state.ownership[sq]
            state.mortgaged.discard(sq)
            events.extend(run_auction(state, sq, agents or ()))
    else:
        for sq in squares:
            state.ownership[sq] = creditor
    return events


# ---------------------------------------------------------------------------
# Auctions
# ---------------------------------------------------------------------------


def run_auction(
    state: GameState,
    square: int,
    agents: Sequence["Agent"],
) -> list[dict[str, Any]]:
    """English ascending auction in seat order; all-pass leaves the bank
    as owner. A bid above the bidder's cash counts as a pass."""
    events: list[dict[str, Any]] = []
    rules = state.rules
    active = [p.id for p in state.players if not p.bankrupt]
    if not agents or not active:
        return events
    standing_bid: float | None = None
    standing_bidder: int | None = None
    view = StateView(state)

    while len(active) > (1 if standing_bidder is not None else 0):
        progressed = False
        for pid in list(active):
            if pid == standing_bidder:
                continue
            min_next = (
                rules.auction_start_price
                if standing_bid is None
                else standing_bid + rules.auction_increment
            )
            response = _agent_call(agents[pid], "bid", view, square, min_next)
            is_bid = (
                response is not None
                and response.kind == BID
                and response.amount is not None
                and response.amount >= min_next
                and response.amount <= state.players[pid].cash
            )
            if is_bid:
                standing_bid = response.amount
                standing_bidder = pid
                progressed = True
                events.append(
                    _event(
                        state, "auction_step", pid, square=square,
                        action="bid", amount=response.amount,
                    )
                )
            else:
                active.remove(pid)
                events.append(
                    _event(state, "auction_step", pid, square=square, action="pass")
                )
        if not progressed:
            break

    if standing_bidder is not None:
        ev = _event(
            state, "purchase", standing_bidder, square=square,
            price=standing_bid, auction=True,
        )
        _transfer(state, ev["payload"], standing_bidder, BANK, standing_bid)
        state.ownership[square] = standing_bidder
        events.append(ev)
    else:
        events.append(
            _event(state, "auction_step", None, square=square, action="unsold")
        )
    return events


# ---------------------------------------------------------------------------
# Read-only view
# ---------------------------------------------------------------------------


class StateView:
    """Read-only projection of a GameState (full information)."""

    __slots__ = ("_state",)

    def __init__(self, state: GameState) -> None:
        object.__setattr__(self, "_state", state)

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("StateView is read-only")

    @property
    def board(self) -> BoardSpec:
        return self._state.board

    @property
    def rules(self) -> EngineRules:
        return self._state.rules

    @property
    def phase(self) -> str:
        return self._state.phase

    @property
    def round(self) -> int:
        return self._state.turn

    @property
    def current_player(self) -> int:
        return self._state.current_player

    @property
    def pending_square(self) -> int | None:
        return self._state.pending_square

    @property
    def player_ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self._state.players)

    @property
    def solvent_ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self._state.players if not p.bankrupt)

    def position_of(self, player: int) -> int:
        return self._state.players[player].position

    def cash_of(self, player: int) -> float:
        return self._state.players[player].cash

    def is_bankrupt(self, player: int) -> bool:
        return self._state.players[player].bankrupt

    def in_jail(self, player: int) -> bool:
        return self._state.players[player].in_jail

    @property
    def ownership(self) -> Mapping[int, int]:
        return dict(self._state.ownership)

    @property
    def improvements(self) -> Mapping[int, int]:
        return dict(self._state.improvements)

    @property
    def mortgaged(self) -> frozenset[int]:
        return frozenset(self._state.mortgaged)

    def owner_of(self, square: int) -> int | None:
        return self._state.ownership.get(square)

    def level_of(self, square: int) -> int:
        return self._state.improvements.get(square, 0)

    def is_mortgaged(self, square: int) -> bool:
        return square in self._state.mortgaged

    def has_monopoly(self, player: int, color: str) -> bool:
        return self._state.has_monopoly(player, color)

    def rent_due(self, square: int) -> float:
        return self._state.rent_due(square)


# ---------------------------------------------------------------------------
# Agent protocol glue
# ---------------------------------------------------------------------------


class Agent:
    """Base agent; subclasses override the decision callbacks.

    Any exception raised by a callback makes the agent forfeit the game.
    """

    def decide(self, view: StateView, legal: tuple[Move, ...]) -> Move:
        return Move.end_phase()

    def bid(self, view: StateView, square: int, min_next: float) -> Move:
        return Move.pass_bid()

    def respond_trade(self, view: StateView, offer: TradeOffer) -> Move:
        return Move(REJECT_TRADE)

    def on_event(self, event: dict[str, Any]) -> None:
        pass

    def on_game_start(self, view: StateView, game_index: int) -> None:
        pass

    def on_game_end(self, view: StateView, game_index: int) -> None:
        pass


def _agent_call(agent: "Agent", method: str, *args: Any):
    try:
        return getattr(agent, method)(*args)
    except Exception:
        return None


# ---------------------------------------------------------------------------
# Game loop
# ---------------------------------------------------------------------------


def _forfeit(
    state: GameState, player: int, events: list[dict[str, Any]]
) -> None:
    force_liquidate(state, player, events)
    events.extend(resolve_bankruptcy(state, player, BANK, None))
    events[-1]["payload"]["forfeit"] = True


def _decision_phase(
    state: GameState,
    actor: int,
    phase: str,
    agents: Sequence[Agent],
    events: list[dict[str, Any]],
) -> None:
    state.phase = phase
    view = StateView(state)
    for _ in range(state.rules.max_actions_per_phase):
        if state.players[actor].bankrupt:
            return
        legal = legal_moves(state, actor)
        if not legal:
            return
        move = _agent_call(agents[actor], "decide", view, legal)
        if move is None:
            _forfeit(state, actor, events)
            return
        if move.kind == END_PHASE:
            return
        try:
            if move.kind == PROPOSE_TRADE:
                new_events = apply_move(state, actor, move, agents)
            else:
                if move not in legal:
                    raise IllegalMoveError(f"move not offered: {move.kind}")
                new_events = apply_move(state, actor, move, agents)
        except IllegalMoveError:
            _forfeit(state, actor, events)
            return
        events.extend(new_events)
    # action cap reached: phase ends


def _buy_or_auction(
    state: GameState,
    player: int,
    agents: Sequence[Agent],
    events: list[dict[str, Any]],
) -> None:
    view = StateView(state)
    legal = legal_moves(state, player)
    move = _agent_call(agents[player], "decide", view, legal)
    if move is None or move not in legal:
        square = state.pending_square
        state.pending_square = None
        state.phase = PHASE_PRE_ROLL
        _forfeit(state, player, events)
        if square is not None:
            events.extend(run_auction(state, square, agents))
        return
    square = state.pending_square
    if move.kind == BUY_PROPERTY:
        events.extend(apply_move(state, player, move, agents))
        state.phase = PHASE_PRE_ROLL
        return
    state.pending_square = None
    state.phase = PHASE_AUCTION
    events.extend(run_auction(state, square, agents))
    state.phase = PHASE_PRE_ROLL


def _jail_turn(
    state: GameState,
    player: int,
    agents: Sequence[Agent],
    events: list[dict[str, Any]],
) -> bool:
    """Handle a jailed player's roll phase. Returns True if the player
    moves this turn (i.e. left jail and rolled)."""
    p = state.players[player]
    options = jail_moves(state, player)
    if len(options) == 1:
        move = options[0]
    else:
        move = _agent_call(agents[player], "decide", StateView(state), options)
        if move is None or move not in options:
            _forfeit(state, player, events)
            return False

    if move.kind == PAY_JAIL_FINE:
        ev = _event(state, "jail", player, action="pay_fine", amount=state.rules.jail_fine)
        _transfer(state, ev["payload"], player, BANK, state.rules.jail_fine)
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
        if p.bankrupt:
            return False
        p.in_jail = False
        p.jail_turns = 0
        return True

    faces = roll_dice(state)
    events.append(
        _event(state, "roll", player, faces=faces, total=sum(faces), in_jail=True)
    )
    doubles = len(faces) >= 2 and len(set(faces)) == 1
    if doubles:
        events.append(_event(state, "jail", player, action="doubles_exit"))
        p.in_jail = False
        p.jail_turns = 0
        _advance(state, player, sum(faces), events)
        events.append(_event(state, "landed", player, square=p.position))
        events.extend(resolve_landing(state, player, agents))
        return False  # already moved with this roll
    p.jail_turns += 1
    if p.jail_turns >= state.rules.jail_max_turns:
        ev = _event(
            state, "jail", player, action="forced_fine", amount=state.rules.jail_fine
        )
        _transfer(state, ev["payload"], player, BANK, state.rules.jail_fine)
        events.append(ev)
        _settle_if_negative(state, player, BANK, events, agents)
        if p.bankrupt:
            return False
        p.in_jail = False
        p.jail_turns = 0
        _advance(state, player, sum(faces), events)
        events.append(_event(state, "landed", player, square=p.position))
        events.extend(resolve_landing(state, player, agents))
    else:
        events.append(_event(state, "jail", player, action="stay"))
    return False


def play_game(
    agents: Sequence[Agent],
    board: BoardSpec,
    novelty: "object | None" = None,
    seed: int = 0,
    max_rounds: int = 200,
    rules: EngineRules = DEFAULT_RULES,
    game_index: int = 0,
) -> GameResult:
    """Run one complete game and return its result with the full event log.

    `novelty`, when given, is an active NoveltySpec: it is applied to the
    board before play and recorded in the log (but not shown to agents
    through their observation hooks).
    """
    if novelty is not None:
        from .novelty import inject_novelty

        board = inject_novelty(board, novelty)
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    state = GameState(board, len(agents), seed, rules)
    events: list[dict[str, Any]] = []
    events.append(
        _event(state, "game_start", None, seed=seed, game_index=game_index,
               n_players=len(agents))
    )
    if novelty is not None:
        from .novelty import novelty_to_json_dict

        events.append(
            _event(state, "novelty_injected", None, novelty=novelty_to_json_dict(novelty))
        )
    broadcast_from = len(events)

    view = StateView(state)
    for agent in agents:
        _agent_call(agent, "on_game_start", view, game_index)

    def broadcast() -> None:
        nonlocal broadcast_from
        for ev in events[broadcast_from:]:
            if ev["kind"] in ("novelty_injected",):
                continue
            for agent in agents:
                _agent_call(agent, "on_event", ev)
        broadcast_from = len(events)

    winner: int | None = None
    rounds_played = 0
    for rnd in range(max_rounds):
        state.turn = rnd
        rounds_played = rnd + 1
        for seat in range(len(state.players)):
            if state.players[seat].bankrupt:
                continue
            state.current_player = seat

            # Pre-roll round: every solvent player may act, roller first.
            n = len(state.players)
            for offset in range(n):
                actor = (seat + offset) % n
                if state.players[actor].bankrupt:
                    continue
                _decision_phase(state, actor, PHASE_PRE_ROLL, agents, events)
            broadcast()
            if state.players[seat].bankrupt:
                continue

            moved = True
            if state.players[seat].in_jail:
                moved = _jail_turn(state, seat, agents, events)
            if moved and not state.players[seat].bankrupt:
                events.extend(roll_and_advance(state, seat))
                events.extend(resolve_landing(state, seat, agents))
            broadcast()

            if state.phase == PHASE_BUY and not state.players[seat].bankrupt:
                _buy_or_auction(state, seat, agents, events)
                broadcast()

            if not state.players[seat].bankrupt:
                _decision_phase(state, seat, PHASE_POST_ROLL, agents, events)
                broadcast()

            solvent = state.solvent_players()
            if len(solvent) == 1:
                winner = solvent[0].id
                break
        if winner is not None:
            break

    if winner is None:
        worths = [(state.net_worth(p.id), p.id) for p in state.solvent_players()]
        best = max(w for w, _ in worths)
        leaders = [pid for w, pid in worths if w == best]
        winner = leaders[0] if len(leaders) == 1 else None

    events.append(
        _event(state, "game_end", winner, rounds=rounds_played, winner=winner)
    )
    broadcast()
    view = StateView(state)
    for agent in agents:
        _agent_call(agent, "on_game_end", view, game_index)

    return GameResult(
        winner=winner,
        rounds=rounds_played,
        digest=state.digest(),
        events=tuple(events),
    )


# ---------------------------------------------------------------------------
# Event log helpers
# ---------------------------------------------------------------------------


def event_to_line(event: dict[str, Any]) -> str:
    return json.dumps(event, sort_keys=True, separators=(",", ":"))


def events_to_jsonl(events: Iterable[dict[str, Any]]) -> str:
    return "\n".join(event_to_line(ev) for ev in events) + "\n"


def check_money_conservation(
    events: Iterable[dict[str, Any]],
    starting_cash: float,
    final_cash: Mapping[int, float],
) -> None:
    """Verify that per-player cash reconstructed from event deltas matches
    the final state and that each event's deltas net to zero."""
    cash: dict[str, float] = {}
    bank = 0.0
    for ev in events:
        deltas = ev["payload"].get("cash")
        if not deltas:
            continue
        if abs(sum(deltas.values())) > 1e-6:
            raise AssertionError(f"event deltas do not net to zero: {ev}")
        for party, delta in deltas.items():
            if party == BANK:
                bank += delta
            else:
                cash[party] = cash.get(party, 0.0) + delta
    for pid, final in final_cash.items():
        reconstructed = starting_cash + cash.get(str(pid), 0.0)
        if abs(reconstructed - final) > 1e-6:
            raise AssertionError(
                f"player {pid}: events give {reconstructed}, state has {final}"
            )
    total_player_change = sum(cash.values())
    if abs(total_player_change + bank) > 1e-6:
        raise AssertionError(
            f"player cash change {total_player_change} != -bank flow {-bank}"
        )
