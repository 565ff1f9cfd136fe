"""Battle event log.

``resolve_turn`` and friends return a list of ``BattleEvent``. Each event
carries the values it left behind (hp_left, pp_left, new_stage, ...) so a
pre-turn state plus the event list reproduces the post-turn state exactly;
``replay_events`` implements that and the tests hold it as an invariant.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields
from enum import Enum
from typing import Optional

from pokegauntlet.engine.model import (
    BattleOutcome,
    BattleState,
    StatName,
    StatusKind,
)


class Side(str, Enum):
    PLAYER = "player"
    ENEMY = "enemy"

    def __invert__(self) -> "Side":
        return Side.ENEMY if self is Side.PLAYER else Side.PLAYER


class EventKind(str, Enum):
    TURN_STARTED = "turn_started"
    TURN_ENDED = "turn_ended"
    MOVE_USED = "move_used"
    MOVE_MISSED = "move_missed"
    DAMAGE_DEALT = "damage_dealt"
    NO_EFFECT = "no_effect"
    STAT_CHANGED = "stat_changed"
    STAT_CHANGE_FAILED = "stat_change_failed"
    STATUS_APPLIED = "status_applied"
    STATUS_BLOCKED = "status_blocked"
    SLEPT = "slept"
    WOKE_UP = "woke_up"
    FULLY_PARALYZED = "fully_paralyzed"
    CONFUSED = "confused"
    HURT_ITSELF = "hurt_itself"
    CONFUSION_ENDED = "confusion_ended"
    DRAINED = "drained"
    RECOIL = "recoil"
    SWITCHED = "switched"
    ITEM_USED = "item_used"
    ESCAPE_ATTEMPTED = "escape_attempted"
    FAINTED = "fainted"
    BATTLE_ENDED = "battle_ended"


@dataclass(frozen=True)
class BattleEvent:
    kind: EventKind
    side: Optional[Side] = None  # the acting/affected side
    name: Optional[str] = None  # monster display name, for rendering
    move: Optional[str] = None
    slot: Optional[int] = None  # 0-based move slot; None for Struggle
    damage: Optional[int] = None
    critical: bool = False
    effectiveness: Optional[float] = None
    hp_left: Optional[int] = None
    pp_left: Optional[int] = None
    stat: Optional[StatName] = None
    delta: Optional[int] = None
    new_stage: Optional[int] = None
    status: Optional[StatusKind] = None
    turns_left: Optional[int] = None
    amount: Optional[int] = None
    party_index: Optional[int] = None
    forced: bool = False
    item: Optional[str] = None
    potions_left: Optional[int] = None
    success: Optional[bool] = None
    attempts: Optional[int] = None
    turn_number: Optional[int] = None
    outcome: Optional[BattleOutcome] = None

    def as_dict(self) -> dict[str, object]:
        """JSON-ready dict; omits unset fields and flattens enums."""
        out: dict[str, object] = {}
        for spec in fields(self):
            value = getattr(self, spec.name)
            if value is None:
                continue
            if spec.name in ("critical", "forced") and value is False:
                continue
            if isinstance(value, Enum):
                value = value.value
            out[spec.name] = value
        return out


def _owner(event: BattleEvent) -> str:
    return event.name or (event.side.value if event.side else "?")


def render_event(event: BattleEvent) -> str:
    """One human-readable line per event, used in prompts and the console."""
    kind = event.kind
    who = _owner(event)
    if kind is EventKind.TURN_STARTED:
        return f"-- Turn {event.turn_number} --"
    if kind is EventKind.TURN_ENDED:
        return ""  # bookkeeping only; callers drop empty lines
    if kind is EventKind.MOVE_USED:
        return f"{who} used {event.move}!"
    if kind is EventKind.MOVE_MISSED:
        return f"{who}'s attack missed!"
    if kind is EventKind.DAMAGE_DEALT:
        parts = [f"{who} took {event.damage} damage"]
        if event.critical:
            parts.append("(critical hit)")
        if event.effectiveness is not None and event.effectiveness > 1:
            parts.append("(super effective)")
        elif event.effectiveness is not None and event.effectiveness < 1:
            parts.append("(not very effective)")
        return " ".join(parts) + f". {event.hp_left} HP left."
    if kind is EventKind.NO_EFFECT:
        return f"It doesn't affect {who}."
    if kind is EventKind.STAT_CHANGED:
        direction = "rose" if (event.delta or 0) > 0 else "fell"
        return f"{who}'s {event.stat.value} {direction} to stage {event.new_stage}."
    if kind is EventKind.STAT_CHANGE_FAILED:
        return f"{who}'s {event.stat.value} won't go any further!"
    if kind is EventKind.STATUS_APPLIED:
        labels = {
            StatusKind.SLEEP: "fell asleep",
            StatusKind.PARALYSIS: "is paralyzed",
            StatusKind.CONFUSION: "became confused",
        }
        return f"{who} {labels[event.status]}!"
    if kind is EventKind.STATUS_BLOCKED:
        return f"{who} is unaffected."
    if kind is EventKind.SLEPT:
        return f"{who} is fast asleep."
    if kind is EventKind.WOKE_UP:
        return f"{who} woke up!"
    if kind is EventKind.FULLY_PARALYZED:
        return f"{who} is fully paralyzed!"
    if kind is EventKind.CONFUSED:
        return f"{who} is confused!"
    if kind is EventKind.HURT_ITSELF:
        return f"{who} hurt itself in confusion for {event.damage}. {event.hp_left} HP left."
    if kind is EventKind.CONFUSION_ENDED:
        return f"{who} snapped out of confusion!"
    if kind is EventKind.DRAINED:
        return f"{who} drained {event.amount} HP. {event.hp_left} HP left."
    if kind is EventKind.RECOIL:
        return f"{who} was hurt by recoil for {event.damage}. {event.hp_left} HP left."
    if kind is EventKind.SWITCHED:
        how = "was sent out" if event.forced else "switched in"
        return f"{who} {how}!"
    if kind is EventKind.ITEM_USED:
        return (
            f"Used {event.item} on {who}: healed {event.amount} HP"
            f" to {event.hp_left}. {event.potions_left} left."
        )
    if kind is EventKind.ESCAPE_ATTEMPTED:
        return "Got away safely!" if event.success else "Can't escape!"
    if kind is EventKind.FAINTED:
        return f"{who} fainted!"
    if kind is EventKind.BATTLE_ENDED:
        return f"Battle over: {event.outcome.value}."
    raise ValueError(f"unrenderable event kind {kind}")  # pragma: no cover


def _monster_for(state: BattleState, event: BattleEvent):
    if event.side is Side.ENEMY:
        return state.enemy
    if event.party_index is not None and event.kind is EventKind.ITEM_USED:
        return state.party[event.party_index]
    return state.active


def replay_events(state: BattleState, events: list[BattleEvent]) -> BattleState:
    """Apply an event list to a copy of `state`; returns the new state.

    The engine already wrote the authoritative values into the events, so
    replay is pure bookkeeping with no randomness.
    """
    out = copy.deepcopy(state)
    for event in events:
        kind = event.kind
        if kind in (EventKind.TURN_STARTED, EventKind.TURN_ENDED):
            out.turn_number = event.turn_number
        elif kind is EventKind.MOVE_USED:
            if event.slot is not None:
                _monster_for(out, event).moves[event.slot].pp = event.pp_left
        elif kind in (EventKind.DAMAGE_DEALT, EventKind.HURT_ITSELF):
            _monster_for(out, event).current_hp = event.hp_left
        elif kind is EventKind.STAT_CHANGED:
            target = _monster_for(out, event)
            setattr(target.stages, event.stat.value, event.new_stage)
        elif kind is EventKind.STATUS_APPLIED:
            target = _monster_for(out, event)
            target.status.kind = event.status
            target.status.turns_left = event.turns_left or 0
        elif kind in (EventKind.SLEPT, EventKind.CONFUSED):
            _monster_for(out, event).status.turns_left = event.turns_left
        elif kind in (EventKind.WOKE_UP, EventKind.CONFUSION_ENDED):
            _monster_for(out, event).status.clear()
        elif kind in (EventKind.DRAINED, EventKind.RECOIL):
            _monster_for(out, event).current_hp = event.hp_left
        elif kind is EventKind.SWITCHED:
            if event.side is Side.PLAYER:
                outgoing = out.party[out.active_index]
                outgoing.stages.reset()
                if outgoing.status.kind is StatusKind.CONFUSION:
                    outgoing.status.clear()
                out.active_index = event.party_index
                out.active.enter_battle()
                out.forced_switch_pending = False
        elif kind is EventKind.ITEM_USED:
            out.party[event.party_index].current_hp = event.hp_left
            out.bag.potions = event.potions_left
        elif kind is EventKind.ESCAPE_ATTEMPTED:
            out.escape_attempts = event.attempts
        elif kind is EventKind.FAINTED:
            _monster_for(out, event).current_hp = 0
            if event.side is Side.PLAYER and event.forced:
                out.forced_switch_pending = True
        elif kind is EventKind.BATTLE_ENDED:
            out.outcome = event.outcome
            out.forced_switch_pending = False
    return out
