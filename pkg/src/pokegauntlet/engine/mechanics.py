"""Stat, damage, and multiplier formulas.

All arithmetic is integer with explicit floors so results are exactly
reproducible. The stage ratio tables and type chart are data, not code;
they arrive here through a ``Ruleset``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from pokegauntlet.engine.model import (
    DvSpread,
    Monster,
    MoveCategory,
    MoveSlot,
    MoveSpec,
    SpeciesSpec,
    StatName,
    TypeId,
    MAX_STAGE,
    MIN_STAGE,
)

# Uniform damage roll bounds, inclusive.
RANDOM_FACTOR_MIN = 217
RANDOM_FACTOR_MAX = 255


@dataclass(frozen=True)
class Ruleset:
    """Engine constants loaded from data files.

    ``type_chart`` maps (attacking, defending) to a multiplier in
    {0.0, 0.5, 1.0, 2.0}; missing pairs mean neutral. The two ratio tables
    are 13-tuples of (numerator, denominator) indexed by stage + 6.
    """

    type_chart: dict[tuple[TypeId, TypeId], float]
    stat_stage_ratios: tuple[tuple[int, int], ...]
    accuracy_stage_ratios: tuple[tuple[int, int], ...]
    struggle: MoveSpec

    def __post_init__(self) -> None:
        for label, table in (
            ("stat", self.stat_stage_ratios),
            ("accuracy", self.accuracy_stage_ratios),
        ):
            if len(table) != MAX_STAGE - MIN_STAGE + 1:
                raise ValueError(f"{label} stage table must have 13 entries")
        for pair, value in self.type_chart.items():
            if value not in (0.0, 0.5, 1.0, 2.0):
                raise ValueError(f"type chart entry {pair} has multiplier {value}")


def hp_stat(base: int, dv: int, level: int) -> int:
    return (base + dv) * 2 * level // 100 + level + 10


def other_stat(base: int, dv: int, level: int) -> int:
    return (base + dv) * 2 * level // 100 + 5


def create_monster(
    species: SpeciesSpec,
    level: int,
    dvs: DvSpread,
    moves: Optional[list[MoveSpec]] = None,
) -> Monster:
    """Build a battle-ready monster at full HP.

    When ``moves`` is omitted the species learnset supplies the most
    recent four moves at this level.
    """
    if moves is None:
        moves = list(species.moves_at_level(level))
    if not 1 <= level <= 100:
        raise ValueError(f"level {level} out of range")
    if not 1 <= len(moves) <= 4:
        raise ValueError(f"{species.name} needs 1-4 moves, got {len(moves)}")
    max_hp = hp_stat(species.base_hp, dvs.hp, level)
    return Monster(
        species=species,
        level=level,
        dvs=dvs,
        max_hp=max_hp,
        attack=other_stat(species.base_attack, dvs.attack, level),
        defense=other_stat(species.base_defense, dvs.defense, level),
        speed=other_stat(species.base_speed, dvs.speed, level),
        special=other_stat(species.base_special, dvs.special, level),
        current_hp=max_hp,
        moves=[MoveSlot(move=move, pp=move.max_pp) for move in moves],
    )


def _ratio_for(table: tuple[tuple[int, int], ...], stage: int) -> tuple[int, int]:
    if not MIN_STAGE <= stage <= MAX_STAGE:
        raise ValueError(f"stage {stage} out of [{MIN_STAGE}, {MAX_STAGE}]")
    return table[stage - MIN_STAGE]


def stage_multiplier(rules: Ruleset, stage: int) -> float:
    """Battle-stat multiplier (attack/defense/speed/special) for a stage."""
    num, den = _ratio_for(rules.stat_stage_ratios, stage)
    return num / den


def accuracy_multiplier(rules: Ruleset, stage: int) -> float:
    """Accuracy/evasion multiplier for a stage; a separate, gentler table."""
    num, den = _ratio_for(rules.accuracy_stage_ratios, stage)
    return num / den


def staged_stat(rules: Ruleset, raw: int, stage: int) -> int:
    """Apply a battle-stat stage with floor division, minimum 1."""
    num, den = _ratio_for(rules.stat_stage_ratios, stage)
    return max(1, raw * num // den)


def type_effectiveness(
    rules: Ruleset, attacking: TypeId, defender_types: tuple[TypeId, ...]
) -> float:
    """Combined chart multiplier against one or two defender types."""
    result = 1.0
    for defending in defender_types:
        result *= rules.type_chart.get((attacking, defending), 1.0)
    return result


# Chart multipliers as exact ratios, for integer damage math.
_CHART_RATIOS = {0.0: (0, 1), 0.5: (1, 2), 1.0: (1, 1), 2.0: (2, 1)}


def compute_damage(
    rules: Ruleset,
    attacker: Monster,
    defender: Monster,
    move: MoveSpec,
    *,
    critical: bool,
    rng: random.Random,
) -> int:
    """Damage for one hit of a damaging move; draws the random factor.

    Critical hits double the effective level and ignore stat stages on
    both sides. Immunity yields exactly 0; any other effectiveness yields
    at least 1.
    """
    if not move.is_damaging:
        raise ValueError(f"{move.name} is a status move")

    if move.category is MoveCategory.PHYSICAL:
        attack_raw, defense_raw = attacker.attack, defender.defense
        attack_stage = attacker.stages.get(StatName.ATTACK)
        defense_stage = defender.stages.get(StatName.DEFENSE)
    else:
        attack_raw, defense_raw = attacker.special, defender.special
        attack_stage = attacker.stages.get(StatName.SPECIAL)
        defense_stage = defender.stages.get(StatName.SPECIAL)

    if critical:
        level = attacker.level * 2
        attack_stat, defense_stat = attack_raw, defense_raw
    else:
        level = attacker.level
        attack_stat = staged_stat(rules, attack_raw, attack_stage)
        defense_stat = staged_stat(rules, defense_raw, defense_stage)

    damage = (
        (2 * level // 5 + 2) * move.power * attack_stat // max(1, defense_stat)
    ) // 50 + 2

    if move.move_type in attacker.species.types:
        damage = damage * 3 // 2

    immune = False
    for defending in defender.species.types:
        multiplier = rules.type_chart.get((move.move_type, defending), 1.0)
        num, den = _CHART_RATIOS[multiplier]
        damage = damage * num // den
        if num == 0:
            immune = True

    if immune:
        return 0

    roll = rng.randint(RANDOM_FACTOR_MIN, RANDOM_FACTOR_MAX)
    damage = damage * roll // 255
    return max(1, damage)
