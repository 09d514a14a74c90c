"""Static game configuration: squares, color groups, cards, and dice.

A board is loaded from a JSON file, validated, and then treated as
immutable. Every game that runs on a board shares the same object;
rule changes are expressed by deriving a new board, never by mutation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Any, BinaryIO

KIND_GO = "go"
KIND_PROPERTY = "property"
KIND_TAX = "tax"
KIND_CHANCE = "chance"
KIND_COMMUNITY = "community"
KIND_FREE_PARKING = "free-parking"
KIND_JAIL_VISIT = "jail-visit"
KIND_GO_TO_JAIL = "go-to-jail"

SQUARE_KINDS = (
    KIND_GO,
    KIND_PROPERTY,
    KIND_TAX,
    KIND_CHANCE,
    KIND_COMMUNITY,
    KIND_FREE_PARKING,
    KIND_JAIL_VISIT,
    KIND_GO_TO_JAIL,
)

CARD_EFFECTS = ("move-to", "pay", "receive", "go-to-jail", "pay-per-house")

# Rent tier keys, in escalation order. "house_1".."house_k" index into
# house_rents; "hotel" is the level above the last house tier.
TIER_BASE = "base"
TIER_MONOPOLY = "monopoly"
TIER_HOTEL = "hotel"


class BoardError(ValueError):
    """Base class for board loading problems."""


class BoardParseError(BoardError):
    """The source bytes are not a well-formed board file."""


class BoardValidationError(BoardError):
    """The board file parsed but violates a structural invariant."""


@dataclass(frozen=True)
class Die:
    faces: tuple[int, ...]
    weights: tuple[float, ...]

    def expected_value(self) -> float:
        return sum(f * w for f, w in zip(self.faces, self.weights))


@dataclass(frozen=True)
class DiceSpec:
    dice: tuple[Die, ...]

    def expected_sum(self) -> float:
        return sum(d.expected_value() for d in self.dice)

    def min_sum(self) -> int:
        return sum(min(d.faces) for d in self.dice)

    def max_sum(self) -> int:
        return sum(max(d.faces) for d in self.dice)

    def sum_distribution(self) -> dict[int, float]:
        """Exact distribution of the total across all dice."""
        dist: dict[int, float] = {0: 1.0}
        for die in self.dice:
            nxt: dict[int, float] = {}
            for total, p in dist.items():
                for f, w in zip(die.faces, die.weights):
                    nxt[total + f] = nxt.get(total + f, 0.0) + p * w
            dist = nxt
        return dist


@dataclass(frozen=True)
class CardSpec:
    effect: str
    text: str
    square: int | None = None
    amount: float | None = None
    hotel_amount: float | None = None


@dataclass(frozen=True)
class SquareSpec:
    kind: str
    name: str
    price: float | None = None
    mortgage_value: float | None = None
    color: str | None = None
    base_rent: float | None = None
    monopoly_rent: float | None = None
    house_rents: tuple[float, ...] = ()
    hotel_rent: float | None = None
    house_cost: float | None = None
    tax_amount: float | None = None

    @cached_property
    def max_level(self) -> int:
        """Highest improvement level: houses, plus one if a hotel tier exists."""
        if self.kind != KIND_PROPERTY:
            return 0
        return len(self.house_rents) + (1 if self.hotel_rent is not None else 0)

    def rent_at(self, level: int, monopoly: bool) -> float:
        """Rent owed by a visitor given the owner's improvements."""
        if level <= 0:
            return self.monopoly_rent if monopoly else self.base_rent
        if level <= len(self.house_rents):
            return self.house_rents[level - 1]
        return self.hotel_rent

    def tier_at(self, level: int, monopoly: bool) -> str:
        if level <= 0:
            return TIER_MONOPOLY if monopoly else TIER_BASE
        if level <= len(self.house_rents):
            return f"house_{level}"
        return TIER_HOTEL

    def rent_tiers(self) -> list[tuple[str, float]]:
        """All (tier key, rent) pairs for this property."""
        tiers = [(TIER_BASE, self.base_rent), (TIER_MONOPOLY, self.monopoly_rent)]
        tiers += [(f"house_{i + 1}", r) for i, r in enumerate(self.house_rents)]
        if self.hotel_rent is not None:
            tiers.append((TIER_HOTEL, self.hotel_rent))
        return tiers


@dataclass(frozen=True)
class BoardSpec:
    squares: tuple[SquareSpec, ...]
    go_increment: float
    dice: DiceSpec
    chance_deck: tuple[CardSpec, ...]
    community_deck: tuple[CardSpec, ...]
    mortgage_interest_rate: float
    bank_houses: int
    bank_hotels: int
    # Optional per-color override of how many properties grant a monopoly;
    # colors absent from this map require the full set.
    monopoly_required: tuple[tuple[str, int], ...] = ()

    @property
    def n(self) -> int:
        return len(self.squares)

    @cached_property
    def colors(self) -> dict[str, frozenset[int]]:
        out: dict[str, set[int]] = {}
        for i, sq in enumerate(self.squares):
            if sq.kind == KIND_PROPERTY:
                out.setdefault(sq.color, set()).add(i)
        return {c: frozenset(s) for c, s in out.items()}

    @cached_property
    def color_members(self) -> dict[str, tuple[int, ...]]:
        return {c: tuple(sorted(s)) for c, s in self.colors.items()}

    @cached_property
    def property_squares(self) -> tuple[int, ...]:
        return tuple(
            i for i, sq in enumerate(self.squares) if sq.kind == KIND_PROPERTY
        )

    @cached_property
    def _required(self) -> dict[str, int]:
        required = {c: len(s) for c, s in self.colors.items()}
        required.update(dict(self.monopoly_required))
        return required

    def required_for_monopoly(self, color: str) -> int:
        return self._required[color]

    def jail_square(self) -> int | None:
        for i, sq in enumerate(self.squares):
            if sq.kind == KIND_JAIL_VISIT:
                return i
        return None

    @cached_property
    def _unmortgage_costs(self) -> dict[int, float]:
        return {
            i: sq.mortgage_value + round(sq.mortgage_value * self.mortgage_interest_rate, 2)
            for i, sq in enumerate(self.squares)
            if sq.kind == KIND_PROPERTY
        }

    def unmortgage_cost(self, square: int) -> float:
        """Buy-back price: principal plus interest, rounded to cents."""
        return self._unmortgage_costs[square]


# ---------------------------------------------------------------------------
# JSON (de)serialization. Key order is fixed so serialization is canonical
# and load -> dump -> load round-trips bit-exactly.
# ---------------------------------------------------------------------------


def _square_to_json(sq: SquareSpec) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": sq.kind, "name": sq.name}
    if sq.kind == KIND_PROPERTY:
        out.update(
            price=sq.price,
            mortgage_value=sq.mortgage_value,
            color=sq.color,
            base_rent=sq.base_rent,
            monopoly_rent=sq.monopoly_rent,
            house_rents=list(sq.house_rents),
            house_cost=sq.house_cost,
        )
        if sq.hotel_rent is not None:
            out["hotel_rent"] = sq.hotel_rent
    elif sq.kind == KIND_TAX:
        out["amount"] = sq.tax_amount
    return out


def _square_from_json(obj: dict[str, Any], index: int) -> SquareSpec:
    kind = obj.get("kind")
    if kind not in SQUARE_KINDS:
        raise BoardParseError(f"squares[{index}].kind: unknown kind {kind!r}")
    name = obj.get("name", f"Square {index}")
    if kind == KIND_PROPERTY:
        try:
            return SquareSpec(
                kind=kind,
                name=name,
                price=float(obj["price"]),
                mortgage_value=float(obj["mortgage_value"]),
                color=str(obj["color"]),
                base_rent=float(obj["base_rent"]),
                monopoly_rent=float(obj["monopoly_rent"]),
                house_rents=tuple(float(r) for r in obj["house_rents"]),
                hotel_rent=(
                    float(obj["hotel_rent"]) if "hotel_rent" in obj else None
                ),
                house_cost=float(obj["house_cost"]),
            )
        except KeyError as exc:
            raise BoardParseError(
                f"squares[{index}]: missing property field {exc.args[0]!r}"
            ) from exc
    if kind == KIND_TAX:
        if "amount" not in obj:
            raise BoardParseError(f"squares[{index}]: missing tax field 'amount'")
        return SquareSpec(kind=kind, name=name, tax_amount=float(obj["amount"]))
    return SquareSpec(kind=kind, name=name)


def _card_to_json(card: CardSpec) -> dict[str, Any]:
    out: dict[str, Any] = {"effect": card.effect, "text": card.text}
    if card.square is not None:
        out["square"] = card.square
    if card.amount is not None:
        out["amount"] = card.amount
    if card.hotel_amount is not None:
        out["hotel_amount"] = card.hotel_amount
    return out


def _card_from_json(obj: dict[str, Any], where: str) -> CardSpec:
    effect = obj.get("effect")
    if effect not in CARD_EFFECTS:
        raise BoardParseError(f"{where}.effect: unknown effect {effect!r}")
    return CardSpec(
        effect=effect,
        text=obj.get("text", effect),
        square=(int(obj["square"]) if "square" in obj else None),
        amount=(float(obj["amount"]) if "amount" in obj else None),
        hotel_amount=(
            float(obj["hotel_amount"]) if "hotel_amount" in obj else None
        ),
    )


def board_to_json_dict(spec: BoardSpec) -> dict[str, Any]:
    out: dict[str, Any] = {
        "squares": [_square_to_json(sq) for sq in spec.squares],
        "go_increment": spec.go_increment,
        "dice": [
            {"faces": list(d.faces), "weights": list(d.weights)}
            for d in spec.dice.dice
        ],
        "chance_deck": [_card_to_json(c) for c in spec.chance_deck],
        "community_deck": [_card_to_json(c) for c in spec.community_deck],
        "mortgage_interest_rate": spec.mortgage_interest_rate,
        "bank_houses": spec.bank_houses,
        "bank_hotels": spec.bank_hotels,
    }
    if spec.monopoly_required:
        out["monopoly_required"] = {c: r for c, r in spec.monopoly_required}
    return out


def board_from_json_dict(obj: dict[str, Any]) -> BoardSpec:
    try:
        squares = tuple(
            _square_from_json(sq, i) for i, sq in enumerate(obj["squares"])
        )
        dice = DiceSpec(
            dice=tuple(
                Die(
                    faces=tuple(int(f) for f in d["faces"]),
                    weights=tuple(float(w) for w in d["weights"]),
                )
                for d in obj["dice"]
            )
        )
        spec = BoardSpec(
            squares=squares,
            go_increment=float(obj["go_increment"]),
            dice=dice,
            chance_deck=tuple(
                _card_from_json(c, f"chance_deck[{i}]")
                for i, c in enumerate(obj["chance_deck"])
            ),
            community_deck=tuple(
                _card_from_json(c, f"community_deck[{i}]")
                for i, c in enumerate(obj["community_deck"])
            ),
            mortgage_interest_rate=float(obj["mortgage_interest_rate"]),
            bank_houses=int(obj["bank_houses"]),
            bank_hotels=int(obj["bank_hotels"]),
            monopoly_required=tuple(
                sorted(
                    (str(c), int(r))
                    for c, r in obj.get("monopoly_required", {}).items()
                )
            ),
        )
    except BoardError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise BoardParseError(f"malformed board file: {exc}") from exc
    validate_board(spec)
    return spec


def load_board_spec(source: bytes | str | BinaryIO) -> BoardSpec:
    """Parse and validate a board file (path, bytes, or binary stream)."""
    if isinstance(source, str):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = source.read()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BoardParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise BoardParseError("board file must be a JSON object")
    return board_from_json_dict(obj)


def dump_board_spec(spec: BoardSpec) -> bytes:
    """Canonical serialization; dump -> load gives back an equal BoardSpec."""
    return (json.dumps(board_to_json_dict(spec), indent=2) + "\n").encode()


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_board(spec: BoardSpec) -> None:
    squares = spec.squares
    if len(squares) < 4:
        raise BoardValidationError(f"squares: need at least 4, got {len(squares)}")
    go_indices = [i for i, sq in enumerate(squares) if sq.kind == KIND_GO]
    if len(go_indices) > 1:
        raise BoardValidationError("squares: multiple Go squares")
    if go_indices != [0]:
        raise BoardValidationError("squares: exactly one Go square required at index 0")
    if spec.go_increment < 0:
        raise BoardValidationError("go_increment: must be >= 0")
    if spec.mortgage_interest_rate < 0:
        raise BoardValidationError("mortgage_interest_rate: must be >= 0")
    if spec.bank_houses < 0 or spec.bank_hotels < 0:
        raise BoardValidationError("bank_houses/bank_hotels: must be >= 0")

    for i, sq in enumerate(squares):
        if sq.kind == KIND_PROPERTY:
            _validate_property(sq, i)
        elif sq.kind == KIND_TAX:
            if sq.tax_amount is None or sq.tax_amount < 0:
                raise BoardValidationError(f"squares[{i}].amount: must be >= 0")

    for color, members in spec.colors.items():
        if not members:
            raise BoardValidationError(f"colors[{color}]: empty color group")
    for color, req in spec.monopoly_required:
        if color not in spec.colors:
            raise BoardValidationError(
                f"monopoly_required[{color}]: unknown color"
            )
        if req < 1:
            raise BoardValidationError(f"monopoly_required[{color}]: must be >= 1")

    if not spec.dice.dice:
        raise BoardValidationError("dice: at least one die required")
    for d_i, die in enumerate(spec.dice.dice):
        if not die.faces:
            raise BoardValidationError(f"dice[{d_i}].faces: must be non-empty")
        if len(die.faces) != len(die.weights):
            raise BoardValidationError(
                f"dice[{d_i}]: faces and weights lengths differ"
            )
        if any(w < 0 for w in die.weights):
            raise BoardValidationError(f"dice[{d_i}].weights: negative weight")
        if abs(sum(die.weights) - 1.0) > 1e-12:
            raise BoardValidationError(
                f"dice[{d_i}].weights: sum {sum(die.weights)!r} != 1"
            )

    needs_jail = any(sq.kind == KIND_GO_TO_JAIL for sq in squares)
    for deck_name, deck in (
        ("chance_deck", spec.chance_deck),
        ("community_deck", spec.community_deck),
    ):
        for c_i, card in enumerate(deck):
            if card.effect == "move-to":
                if card.square is None or not 0 <= card.square < len(squares):
                    raise BoardValidationError(
                        f"{deck_name}[{c_i}].square: out of range"
                    )
            if card.effect in ("pay", "receive", "pay-per-house"):
                if card.amount is None or card.amount < 0:
                    raise BoardValidationError(
                        f"{deck_name}[{c_i}].amount: must be >= 0"
                    )
            if card.effect == "go-to-jail":
                needs_jail = True
    if needs_jail and spec.jail_square() is None:
        raise BoardValidationError(
            "squares: go-to-jail present but no jail-visit square"
        )


def _validate_property(sq: SquareSpec, i: int) -> None:
    if sq.color is None:
        raise BoardValidationError(f"squares[{i}].color: property without a color")
    for fname in ("price", "mortgage_value", "base_rent", "monopoly_rent", "house_cost"):
        value = getattr(sq, fname)
        if value is None or value < 0:
            raise BoardValidationError(f"squares[{i}].{fname}: must be >= 0")
    if any(r < 0 for r in sq.house_rents):
        raise BoardValidationError(f"squares[{i}].house_rents: negative rent")
    if sq.mortgage_value > sq.price:
        raise BoardValidationError(
            f"squares[{i}].mortgage_value: exceeds price"
        )
    chain = [sq.base_rent, sq.monopoly_rent, *sq.house_rents]
    if sq.hotel_rent is not None:
        if sq.hotel_rent < 0:
            raise BoardValidationError(f"squares[{i}].hotel_rent: must be >= 0")
        chain.append(sq.hotel_rent)
    if any(a > b for a, b in zip(chain, chain[1:])):
        raise BoardValidationError(
            f"squares[{i}]: rent schedule must be non-decreasing"
        )


# ---------------------------------------------------------------------------
# Bundled boards
# ---------------------------------------------------------------------------


def _load_bundled(name: str) -> BoardSpec:
    data = resources.files("monolab.data").joinpath(name).read_bytes()
    return load_board_spec(data)


def tb8_board() -> BoardSpec:
    """8-square test board: small enough for exhaustive enumeration."""
    return _load_bundled("tb8.json")


def standard_board() -> BoardSpec:
    """Bundled 40-square board in the classic US layout."""
    return _load_bundled("standard_board.json")


def bundled_board_path(name: str) -> str:
    """Filesystem path of a bundled board file ("tb8" or "standard")."""
    fname = {"tb8": "tb8.json", "standard": "standard_board.json"}[name]
    return str(resources.files("monolab.data").joinpath(fname))
