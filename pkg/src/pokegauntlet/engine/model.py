"""Core battle data types.

Everything here is plain data: specs are frozen, battle-time objects
(monsters, stages, bag, battle state) are mutable and owned by a single
battle loop. No randomness and no I/O.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class TypeId(str, Enum):
    NORMAL = "normal"
    FIGHTING = "fighting"
    FLYING = "flying"
    POISON = "poison"
    GROUND = "ground"
    ROCK = "rock"
    BUG = "bug"
    GHOST = "ghost"
    FIRE = "fire"
    WATER = "water"
    GRASS = "grass"
    ELECTRIC = "electric"
    PSYCHIC = "psychic"
    ICE = "ice"
    DRAGON = "dragon"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


class MoveCategory(str, Enum):
    PHYSICAL = "physical"
    SPECIAL = "special"
    STATUS = "status"


class EffectKind(str, Enum):
    NONE = "none"
    LOWER_STAT = "lower-stat"
    RAISE_STAT = "raise-stat"
    DRAIN = "drain"
    SLEEP = "sleep"
    PARALYZE = "paralyze"
    CONFUSE = "confuse"


class StatName(str, Enum):
    ATTACK = "attack"
    DEFENSE = "defense"
    SPEED = "speed"
    SPECIAL = "special"
    ACCURACY = "accuracy"
    EVASION = "evasion"


# Stat stages clamp to this symmetric range.
MIN_STAGE = -6
MAX_STAGE = 6


@dataclass(frozen=True)
class MoveEffect:
    """Secondary behaviour of a move; NONE for plain attacks."""

    kind: EffectKind = EffectKind.NONE
    stat: Optional[StatName] = None
    stages: int = 1
    # Drain fraction of damage dealt, healed to the user (rounded up).
    drain_numerator: int = 1
    drain_denominator: int = 2

    def __post_init__(self) -> None:
        if self.kind in (EffectKind.LOWER_STAT, EffectKind.RAISE_STAT):
            if self.stat is None:
                raise ValueError(f"{self.kind.value} effect requires a stat")
            if self.stages < 1:
                raise ValueError("stage change must be at least 1")
        if self.kind is EffectKind.DRAIN:
            if self.drain_numerator < 1 or self.drain_denominator < 1:
                raise ValueError("drain fraction must be positive")


@dataclass(frozen=True)
class MoveSpec:
    name: str
    move_type: TypeId
    category: MoveCategory
    power: int
    accuracy: Optional[int]  # percent; None means the move never misses
    max_pp: int
    priority: int = 0
    effect: MoveEffect = MoveEffect()

    def __post_init__(self) -> None:
        if self.category is MoveCategory.STATUS:
            if self.power != 0:
                raise ValueError(f"status move {self.name} must have power 0")
        elif self.power < 1:
            raise ValueError(f"damaging move {self.name} must have power >= 1")
        if self.accuracy is not None and not 1 <= self.accuracy <= 100:
            raise ValueError(f"move {self.name} accuracy out of range")
        if self.max_pp < 1:
            raise ValueError(f"move {self.name} must have positive PP")
        if self.priority not in (0, 1):
            raise ValueError(f"move {self.name} priority must be 0 or +1")

    @property
    def is_damaging(self) -> bool:
        return self.category is not MoveCategory.STATUS

    @property
    def display_name(self) -> str:
        return self.name.replace("-", " ").title()


@dataclass(frozen=True)
class LearnsetEntry:
    level: int
    move: MoveSpec


@dataclass(frozen=True)
class SpeciesSpec:
    name: str
    type1: TypeId
    type2: Optional[TypeId]
    base_hp: int
    base_attack: int
    base_defense: int
    base_speed: int
    base_special: int
    learnset: tuple[LearnsetEntry, ...] = ()

    def __post_init__(self) -> None:
        if self.type2 is not None and self.type2 == self.type1:
            raise ValueError(f"species {self.name} repeats its primary type")
        for label, value in (
            ("hp", self.base_hp),
            ("attack", self.base_attack),
            ("defense", self.base_defense),
            ("speed", self.base_speed),
            ("special", self.base_special),
        ):
            if not 1 <= value <= 255:
                raise ValueError(f"species {self.name} base {label} out of range")

    @property
    def types(self) -> tuple[TypeId, ...]:
        return (self.type1,) if self.type2 is None else (self.type1, self.type2)

    @property
    def display_name(self) -> str:
        return self.name.replace("-", " ").title()

    def moves_at_level(self, level: int, limit: int = 4) -> tuple[MoveSpec, ...]:
        """The most recent `limit` learnset moves at or below `level`."""
        known = [entry.move for entry in self.learnset if entry.level <= level]
        return tuple(known[-limit:])


@dataclass(frozen=True)
class DvSpread:
    """Per-stat determinant values in [0, 15]."""

    hp: int = 8
    attack: int = 8
    defense: int = 8
    speed: int = 8
    special: int = 8

    def __post_init__(self) -> None:
        for label, value in self.as_dict().items():
            if not 0 <= value <= 15:
                raise ValueError(f"dv {label}={value} out of [0, 15]")

    def as_dict(self) -> dict[str, int]:
        return {
            "hp": self.hp,
            "attack": self.attack,
            "defense": self.defense,
            "speed": self.speed,
            "special": self.special,
        }


@dataclass
class StatStages:
    """In-battle stat modifiers, each clamped to [-6, +6]."""

    attack: int = 0
    defense: int = 0
    speed: int = 0
    special: int = 0
    accuracy: int = 0
    evasion: int = 0

    def get(self, stat: StatName) -> int:
        return getattr(self, stat.value)

    def apply(self, stat: StatName, delta: int) -> int:
        """Shift a stage, clamping; returns the change actually applied."""
        before = self.get(stat)
        after = max(MIN_STAGE, min(MAX_STAGE, before + delta))
        setattr(self, stat.value, after)
        return after - before

    def reset(self) -> None:
        for stat in StatName:
            setattr(self, stat.value, 0)

    def as_dict(self) -> dict[str, int]:
        return {stat.value: self.get(stat) for stat in StatName}


class StatusKind(str, Enum):
    NONE = "none"
    SLEEP = "sleep"
    PARALYSIS = "paralysis"
    CONFUSION = "confusion"


@dataclass
class StatusCondition:
    """A monster carries at most one status at a time."""

    kind: StatusKind = StatusKind.NONE
    turns_left: int = 0  # meaningful for sleep and confusion

    @property
    def is_clear(self) -> bool:
        return self.kind is StatusKind.NONE

    def clear(self) -> None:
        self.kind = StatusKind.NONE
        self.turns_left = 0

    def as_dict(self) -> dict[str, object]:
        return {"kind": self.kind.value, "turns_left": self.turns_left}


@dataclass
class MoveSlot:
    move: MoveSpec
    pp: int

    @property
    def usable(self) -> bool:
        return self.pp > 0

    def as_dict(self) -> dict[str, object]:
        return {"move": self.move.name, "pp": self.pp}


@dataclass
class Monster:
    species: SpeciesSpec
    level: int
    dvs: DvSpread
    max_hp: int
    attack: int
    defense: int
    speed: int
    special: int
    current_hp: int
    moves: list[MoveSlot]
    status: StatusCondition = field(default_factory=StatusCondition)
    stages: StatStages = field(default_factory=StatStages)

    @property
    def fainted(self) -> bool:
        return self.current_hp <= 0

    @property
    def name(self) -> str:
        return self.species.display_name

    def take_damage(self, amount: int) -> int:
        dealt = min(self.current_hp, max(0, amount))
        self.current_hp -= dealt
        return dealt

    def heal(self, amount: int) -> int:
        gained = min(self.max_hp - self.current_hp, max(0, amount))
        self.current_hp += gained
        return gained

    def has_pp(self) -> bool:
        return any(slot.usable for slot in self.moves)

    def enter_battle(self) -> None:
        """Reset the volatile parts when this monster takes the field."""
        self.stages.reset()
        if self.status.kind is StatusKind.CONFUSION:
            self.status.clear()

    def as_dict(self) -> dict[str, object]:
        return {
            "species": self.species.name,
            "level": self.level,
            "hp": self.current_hp,
            "max_hp": self.max_hp,
            "status": self.status.as_dict(),
            "stages": self.stages.as_dict(),
            "moves": [slot.as_dict() for slot in self.moves],
        }


@dataclass
class Bag:
    potions: int = 0

    POTION_HEAL = 20

    def as_dict(self) -> dict[str, int]:
        return {"potions": self.potions}


class BattleOutcome(str, Enum):
    ONGOING = "ongoing"
    WIN = "win"
    LOSS = "loss"
    ESCAPED = "escaped"


class ActionKind(str, Enum):
    MOVE = "move"
    SWITCH = "switch"
    ITEM = "item"
    RUN = "run"


@dataclass(frozen=True)
class Action:
    """A fully resolved in-game action.

    ``move_slot`` and ``party_index`` are 0-based. A MOVE action with
    ``move_slot=None`` is Struggle (forced when no move has PP left).
    """

    kind: ActionKind
    move_slot: Optional[int] = None
    party_index: Optional[int] = None
    item: Optional[str] = None

    @property
    def is_struggle(self) -> bool:
        return self.kind is ActionKind.MOVE and self.move_slot is None


@dataclass
class BattleState:
    """One wild battle: the player's party versus a single enemy."""

    party: list[Monster]
    active_index: int
    enemy: Monster
    bag: Bag
    turn_number: int = 1
    escape_attempts: int = 0
    outcome: BattleOutcome = BattleOutcome.ONGOING
    # Set when the active monster fainted but the battle continues; the
    # next decision must be a switch and the enemy does not act on it.
    forced_switch_pending: bool = False

    @property
    def active(self) -> Monster:
        return self.party[self.active_index]

    @property
    def is_over(self) -> bool:
        return self.outcome is not BattleOutcome.ONGOING

    def bench_indices(self) -> list[int]:
        return [
            i
            for i, member in enumerate(self.party)
            if i != self.active_index and not member.fainted
        ]

    def party_defeated(self) -> bool:
        return all(member.fainted for member in self.party)

    def as_dict(self) -> dict[str, object]:
        return {
            "party": [member.as_dict() for member in self.party],
            "active_index": self.active_index,
            "enemy": self.enemy.as_dict(),
            "bag": self.bag.as_dict(),
            "turn_number": self.turn_number,
            "escape_attempts": self.escape_attempts,
            "outcome": self.outcome.value,
            "forced_switch_pending": self.forced_switch_pending,
        }
