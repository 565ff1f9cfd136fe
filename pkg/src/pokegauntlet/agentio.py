"""State serialization, the action wire format, and validation.

The same menu builder feeds both the prompt's "valid actions" section and
``validate_action``, so an action is accepted exactly when the prompt
offered it. Wire indices are 1-based: move indices name the move slot,
switch indices name the party slot, item indices name the enumerated item
line. ``run`` carries no index.
"""

from __future__ import annotations

import json
import string
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from pokegauntlet.engine.events import BattleEvent, render_event
from pokegauntlet.engine.model import (
    Action,
    ActionKind,
    BattleState,
    Monster,
    StatusKind,
)
from pokegauntlet.engine.battle import valid_actions

HISTORY_ROUNDS = 3

PROMPT_SECTION_SEPARATOR = "\n---\n"


class ParseError(ValueError):
    """The reply text did not contain a usable action object."""


class InvalidActionError(ValueError):
    """A well-formed request that names no currently valid action."""

    def __init__(self, message: str, request: "ActionRequest"):
        super().__init__(message)
        self.request = request


@dataclass(frozen=True)
class AblationMask:
    """Which optional action families the agent may use.

    Moves are never masked; a forced switch is exempt from
    ``allow_strategic_switch`` because the battle cannot continue
    without it.
    """

    allow_strategic_switch: bool = True
    allow_item: bool = True
    allow_escape: bool = True

    VARIANTS = ("full", "no-escape", "no-switch", "no-item")

    @property
    def slug(self) -> str:
        if self == AblationMask():
            return "full"
        disabled = [
            label
            for label, allowed in (
                ("switch", self.allow_strategic_switch),
                ("item", self.allow_item),
                ("escape", self.allow_escape),
            )
            if not allowed
        ]
        return "no-" + "-".join(disabled)

    @classmethod
    def from_slug(cls, slug: str) -> "AblationMask":
        named = {
            "full": cls(),
            "no-switch": cls(allow_strategic_switch=False),
            "no-item": cls(allow_item=False),
            "no-escape": cls(allow_escape=False),
        }
        if slug not in named:
            raise ValueError(
                f"unknown mask {slug!r}; expected one of {sorted(named)}"
            )
        return named[slug]


@dataclass(frozen=True)
class ActionRequest:
    """An action as it appears on the wire, before validation."""

    kind: ActionKind
    index: Optional[int]
    raw: str = ""

    def as_wire(self) -> dict[str, object]:
        wire: dict[str, object] = {"action": self.kind.value}
        if self.index is not None:
            wire["index"] = self.index
        return wire


@dataclass(frozen=True)
class MenuEntry:
    action: Action
    kind: ActionKind
    index: Optional[int]  # wire index; None only for run
    label: str

    def wire_text(self) -> str:
        wire: dict[str, object] = {"action": self.kind.value}
        if self.index is not None:
            wire["index"] = self.index
        return json.dumps(wire)


@dataclass(frozen=True)
class ActionMenu:
    """The enumerated valid actions for one decision point."""

    entries: tuple[MenuEntry, ...]

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(entry.action for entry in self.entries)

    def lines(self) -> list[str]:
        return [f"{entry.wire_text()} = {entry.label}" for entry in self.entries]

    def wire_summary(self) -> str:
        return ", ".join(entry.wire_text() for entry in self.entries)


def _hp_text(monster: Monster) -> str:
    return f"HP {monster.current_hp}/{monster.max_hp}"


def _status_text(monster: Monster) -> str:
    status = monster.status
    if status.is_clear:
        return "status: none"
    return f"status: {status.kind.value}"


def build_action_menu(state: BattleState, mask: AblationMask) -> ActionMenu:
    entries: list[MenuEntry] = []
    for action in valid_actions(state, mask):
        if action.kind is ActionKind.MOVE:
            if action.move_slot is None:
                entries.append(
                    MenuEntry(
                        action,
                        ActionKind.MOVE,
                        1,
                        "use Struggle (every move is out of PP)",
                    )
                )
            else:
                slot = state.active.moves[action.move_slot]
                move = slot.move
                power = f"power {move.power}" if move.is_damaging else "status"
                entries.append(
                    MenuEntry(
                        action,
                        ActionKind.MOVE,
                        action.move_slot + 1,
                        f"use {move.display_name} ({move.move_type.value}, {power},"
                        f" PP {slot.pp}/{move.max_pp})",
                    )
                )
        elif action.kind is ActionKind.SWITCH:
            member = state.party[action.party_index]
            entries.append(
                MenuEntry(
                    action,
                    ActionKind.SWITCH,
                    action.party_index + 1,
                    f"switch to {member.name} ({_hp_text(member)})",
                )
            )
        elif action.kind is ActionKind.ITEM:
            member = state.party[action.party_index]
            entries.append(
                MenuEntry(
                    action,
                    ActionKind.ITEM,
                    # item indices count the item lines themselves
                    sum(1 for e in entries if e.kind is ActionKind.ITEM) + 1,
                    f"use Potion on {member.name} ({_hp_text(member)})",
                )
            )
        else:
            entries.append(MenuEntry(action, ActionKind.RUN, None, "flee the battle"))
    return ActionMenu(entries=tuple(entries))


class HistoryWindow:
    """The last few rounds of battle text, oldest first."""

    def __init__(self, max_rounds: int = HISTORY_ROUNDS):
        self.max_rounds = max_rounds
        self._rounds: deque[list[str]] = deque(maxlen=max_rounds)

    def record(self, events: Sequence[BattleEvent]) -> "HistoryWindow":
        lines = [line for line in (render_event(e) for e in events) if line]
        if lines:
            self._rounds.append(lines)
        return self

    def clear(self) -> None:
        self._rounds.clear()

    @property
    def rounds(self) -> list[list[str]]:
        return [list(lines) for lines in self._rounds]

    def render_block(self) -> str:
        if not self._rounds:
            return "(no rounds yet)"
        return "\n".join(line for lines in self._rounds for line in lines)


def record_round(history: HistoryWindow, events: Sequence[BattleEvent]) -> HistoryWindow:
    """Fold one resolution's events into the rolling window."""
    return history.record(events)


@dataclass(frozen=True)
class PromptTemplate:
    version: str
    system_text: str
    user_template: string.Template

    @classmethod
    def from_file(cls, path: Path | str) -> "PromptTemplate":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if PROMPT_SECTION_SEPARATOR not in text:
            raise ValueError(
                f"{path}: prompt file needs a '---' line between system and user parts"
            )
        system_text, user_text = text.split(PROMPT_SECTION_SEPARATOR, 1)
        return cls(
            version=path.stem,
            system_text=system_text.strip(),
            user_template=string.Template(user_text.strip()),
        )


def _describe_monster(monster: Monster, *, with_moves: bool) -> str:
    types = "/".join(t.value for t in monster.species.types)
    lines = [
        f"{monster.name} ({types}), level {monster.level},"
        f" {_hp_text(monster)}, {_status_text(monster)}"
    ]
    stages = {
        name: value for name, value in monster.stages.as_dict().items() if value != 0
    }
    if stages:
        changes = ", ".join(f"{name} {value:+d}" for name, value in stages.items())
        lines.append(f"stat stages: {changes}")
    if with_moves:
        for i, slot in enumerate(monster.moves, start=1):
            move = slot.move
            detail = f"power {move.power}" if move.is_damaging else "status"
            accuracy = "never misses" if move.accuracy is None else f"acc {move.accuracy}"
            lines.append(
                f"  move {i}: {move.display_name} ({move.move_type.value},"
                f" {detail}, {accuracy}, PP {slot.pp}/{move.max_pp})"
            )
    return "\n".join(lines)


def serialize_state(
    state: BattleState,
    history: HistoryWindow,
    memory_snippets: Sequence[str],
    mask: AblationMask,
    template: PromptTemplate,
    *,
    location: str = "unknown",
    battle_number: int = 1,
    menu: Optional[ActionMenu] = None,
) -> str:
    """Render the user prompt for one decision point."""
    if menu is None:
        menu = build_action_menu(state, mask)

    bench_lines = [
        f"#{i + 1} {member.name}, level {member.level}, {_hp_text(member)},"
        f" {_status_text(member)}" + (" (fainted)" if member.fainted else "")
        for i, member in enumerate(state.party)
        if i != state.active_index
    ]
    bag_lines = (
        [f"Potion x{state.bag.potions} (restores 20 HP)"]
        if state.bag.potions > 0
        else ["(empty)"]
    )
    if state.forced_switch_pending:
        actions_header = [
            f"{state.active.name} fainted. You must send in a replacement:"
        ]
    else:
        actions_header = []

    return template.user_template.substitute(
        location=location,
        battle_number=battle_number,
        turn_number=state.turn_number,
        enemy_block=_describe_monster(state.enemy, with_moves=False),
        active_block=_describe_monster(state.active, with_moves=True),
        bench_block="\n".join(bench_lines) if bench_lines else "(empty)",
        bag_block="\n".join(bag_lines),
        actions_block="\n".join(actions_header + menu.lines()),
        history_block=history.render_block(),
        memory_block="\n".join(memory_snippets) if memory_snippets else "(none)",
    )


_KIND_ALIASES = {kind.value: kind for kind in ActionKind}


def _scan_json_objects(text: str) -> Iterable[object]:
    """Yield every parseable top-level JSON object in the text, in order.

    Tracks string/escape state so braces inside quoted strings do not
    confuse the balance count.
    """
    depth = 0
    start = None
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            if depth > 0:
                in_string = True
            continue
        if ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0 and start is not None:
                candidate = text[start : i + 1]
                start = None
                try:
                    yield json.loads(candidate)
                except json.JSONDecodeError:
                    continue


def parse_action(raw: str) -> ActionRequest:
    """Extract the first action object from free-form reply text.

    Tolerates surrounding prose and code fences; field names and the
    action kind are case-insensitive; the index may be a number or a
    numeric string.
    """
    if not raw or not raw.strip():
        raise ParseError("empty reply")
    for payload in _scan_json_objects(raw):
        if not isinstance(payload, dict):
            continue
        lowered = {str(k).lower(): v for k, v in payload.items()}
        if "action" not in lowered:
            continue
        kind_raw = lowered["action"]
        if not isinstance(kind_raw, str) or kind_raw.lower() not in _KIND_ALIASES:
            raise ParseError(
                f"unknown action kind {kind_raw!r}; expected one of"
                f" {sorted(_KIND_ALIASES)}"
            )
        index_raw = lowered.get("index")
        index: Optional[int]
        if index_raw is None:
            index = None
        elif isinstance(index_raw, bool):
            raise ParseError("index must be an integer")
        elif isinstance(index_raw, int):
            index = index_raw
        elif isinstance(index_raw, str) and index_raw.strip().lstrip("-").isdigit():
            index = int(index_raw.strip())
        elif isinstance(index_raw, float) and index_raw.is_integer():
            index = int(index_raw)
        else:
            raise ParseError(f"index {index_raw!r} is not an integer")
        return ActionRequest(
            kind=_KIND_ALIASES[kind_raw.lower()], index=index, raw=raw
        )
    raise ParseError('no JSON object with an "action" field found in the reply')


def validate_action(request: ActionRequest, menu: ActionMenu) -> Action:
    """Map a wire request onto the current menu or explain the mismatch."""
    candidates = [entry for entry in menu.entries if entry.kind is request.kind]
    if not candidates:
        raise InvalidActionError(
            f"{json.dumps(request.as_wire())} is not available now;"
            f" valid: {menu.wire_summary()}",
            request,
        )
    if request.kind is ActionKind.RUN:
        return candidates[0].action
    index = request.index
    if index is None:
        if len(candidates) == 1:
            return candidates[0].action
        raise InvalidActionError(
            f'{json.dumps(request.as_wire())} needs an "index";'
            f" valid: {menu.wire_summary()}",
            request,
        )
    for entry in candidates:
        if entry.index == index:
            return entry.action
    raise InvalidActionError(
        f"{json.dumps(request.as_wire())} does not match any valid action;"
        f" valid: {menu.wire_summary()}",
        request,
    )
