"""Factories and scripted randomness shared across the tests."""

from __future__ import annotations

import random
from typing import Optional

from pokegauntlet.engine.mechanics import create_monster
from pokegauntlet.engine.model import (
    Bag,
    BattleState,
    DvSpread,
    MoveCategory,
    MoveEffect,
    MoveSpec,
    SpeciesSpec,
    TypeId,
)


def make_move(
    name: str = "slam",
    move_type: TypeId = TypeId.NORMAL,
    category: MoveCategory = MoveCategory.PHYSICAL,
    power: int = 40,
    accuracy: Optional[int] = 100,
    max_pp: int = 20,
    priority: int = 0,
    effect: MoveEffect = MoveEffect(),
) -> MoveSpec:
    return MoveSpec(
        name=name,
        move_type=move_type,
        category=category,
        power=power,
        accuracy=accuracy,
        max_pp=max_pp,
        priority=priority,
        effect=effect,
    )


def make_species(
    name: str = "testmon",
    types: tuple[TypeId, ...] = (TypeId.NORMAL,),
    base_hp: int = 45,
    base_attack: int = 50,
    base_defense: int = 50,
    base_speed: int = 60,
    base_special: int = 50,
    learnset=(),
) -> SpeciesSpec:
    type1 = types[0]
    type2 = types[1] if len(types) > 1 else None
    return SpeciesSpec(
        name=name,
        type1=type1,
        type2=type2,
        base_hp=base_hp,
        base_attack=base_attack,
        base_defense=base_defense,
        base_speed=base_speed,
        base_special=base_special,
        learnset=tuple(learnset),
    )


def make_monster(
    species: Optional[SpeciesSpec] = None,
    level: int = 10,
    moves: Optional[list[MoveSpec]] = None,
    dvs: Optional[DvSpread] = None,
    **species_kwargs,
):
    if species is None:
        species = make_species(**species_kwargs)
    if moves is None:
        moves = [make_move()]
    return create_monster(species, level, dvs or DvSpread(), moves=moves)


def make_state(
    party=None, enemy=None, potions: int = 2, active_index: int = 0
) -> BattleState:
    if party is None:
        party = [make_monster(name="alpha"), make_monster(name="beta")]
    if enemy is None:
        enemy = make_monster(name="wildone")
    return BattleState(
        party=party,
        active_index=active_index,
        enemy=enemy,
        bag=Bag(potions=potions),
    )


class ScriptedRng(random.Random):
    """Returns canned draws in order; fails loudly when exhausted.

    ``random()`` draws are given as floats, integer draws as ints; the
    script is shared across methods so draw *order* is asserted too.
    """

    def __new__(cls, script):
        return super().__new__(cls, 0)

    def __init__(self, script):
        super().__init__(0)
        self.script = list(script)
        self.consumed = []

    def _next(self, kind: str):
        if not self.script:
            raise AssertionError(f"rng script exhausted; wanted a {kind} draw")
        value = self.script.pop(0)
        self.consumed.append(value)
        return value

    def random(self) -> float:
        value = self._next("random()")
        assert isinstance(value, float), f"expected float draw, script gave {value!r}"
        return value

    def randint(self, a: int, b: int) -> int:
        value = self._next(f"randint({a},{b})")
        assert isinstance(value, int), f"expected int draw, script gave {value!r}"
        assert a <= value <= b, f"scripted {value} outside randint({a},{b})"
        return value

    def randrange(self, start, stop=None, step=1) -> int:
        value = self._next(f"randrange({start},{stop})")
        assert isinstance(value, int), f"expected int draw, script gave {value!r}"
        return value

    def choice(self, seq):
        value = self._next("choice")
        assert value in seq, f"scripted choice {value!r} not in {seq!r}"
        return value
