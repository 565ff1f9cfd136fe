"""Pure battle mechanics: types, formulas, and the turn loop."""

from pokegauntlet.engine.model import (
    Action,
    ActionKind,
    Bag,
    BattleOutcome,
    BattleState,
    DvSpread,
    EffectKind,
    Monster,
    MoveCategory,
    MoveEffect,
    MoveSlot,
    MoveSpec,
    SpeciesSpec,
    StatName,
    StatStages,
    StatusCondition,
    StatusKind,
    TypeId,
)
from pokegauntlet.engine.mechanics import (
    Ruleset,
    accuracy_multiplier,
    compute_damage,
    create_monster,
    hp_stat,
    other_stat,
    stage_multiplier,
    type_effectiveness,
)
from pokegauntlet.engine.events import BattleEvent, EventKind, Side, render_event, replay_events
from pokegauntlet.engine.battle import (
    accuracy_check,
    apply_item,
    attempt_escape,
    critical_check,
    enemy_policy,
    perform_switch,
    resolve_forced_switch,
    resolve_turn,
    valid_actions,
)

__all__ = [
    "Action",
    "ActionKind",
    "Bag",
    "BattleEvent",
    "BattleOutcome",
    "BattleState",
    "DvSpread",
    "EffectKind",
    "EventKind",
    "Monster",
    "MoveCategory",
    "MoveEffect",
    "MoveSlot",
    "MoveSpec",
    "Ruleset",
    "Side",
    "SpeciesSpec",
    "StatName",
    "StatStages",
    "StatusCondition",
    "StatusKind",
    "TypeId",
    "accuracy_check",
    "accuracy_multiplier",
    "apply_item",
    "attempt_escape",
    "compute_damage",
    "create_monster",
    "critical_check",
    "enemy_policy",
    "hp_stat",
    "other_stat",
    "perform_switch",
    "render_event",
    "replay_events",
    "resolve_forced_switch",
    "resolve_turn",
    "stage_multiplier",
    "type_effectiveness",
    "valid_actions",
]
