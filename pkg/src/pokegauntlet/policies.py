"""Decision policies.

Every policy consumes an ``Observation`` (state, menu, rendered prompt,
retrieved memories) and returns a ``PolicyDecision`` whose action is
guaranteed to be on the menu. The LLM policy is the only one that can
fail; after its retry budget it falls back to a uniformly random valid
action and says so in ``source``.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from pokegauntlet.agentio import (
    ActionMenu,
    ActionRequest,
    AblationMask,
    InvalidActionError,
    MenuEntry,
    ParseError,
    PromptTemplate,
    parse_action,
    validate_action,
)
from pokegauntlet.engine.mechanics import Ruleset, type_effectiveness
from pokegauntlet.engine.model import (
    Action,
    ActionKind,
    BattleState,
    Monster,
    MoveSpec,
)
from pokegauntlet.llm import (
    LlmEndpointConfig,
    Transport,
    TransportUnavailable,
    build_chat_request,
    extract_content,
)
from pokegauntlet.memory import MemoryRecord, memory_aware_rule

SOURCE_RANDOM = "random"
SOURCE_HEURISTIC = "heuristic"
SOURCE_MEMORY = "memory"
SOURCE_HUMAN = "human"
SOURCE_LLM = "llm"
SOURCE_FALLBACK = "fallback"

STAB_FACTOR = 1.5
LOW_HP_FRACTION = 0.25
RETRY_NOTICE = (
    "\n\nYour previous reply could not be used: {error}."
    " Reply again with exactly one JSON object chosen from the valid action list."
)


class InteractiveAbort(RuntimeError):
    """The human player closed the input stream."""


@dataclass(frozen=True)
class InvalidAttempt:
    """One rejected model reply, kept for the logs."""

    reason: str
    raw: str

    def as_dict(self) -> dict[str, str]:
        return {"reason": self.reason, "raw": self.raw[:500]}


@dataclass(frozen=True)
class Observation:
    """Everything a policy may look at for one decision."""

    state: BattleState
    menu: ActionMenu
    mask: AblationMask
    prompt: str
    system_text: str = ""
    location: str = "unknown"
    battle_number: int = 1
    memory_results: tuple[tuple[MemoryRecord, float], ...] = ()


@dataclass
class PolicyDecision:
    action: Action
    request: ActionRequest
    source: str
    retries_used: int = 0
    latency_ms: int = 0
    invalid_attempts: list[InvalidAttempt] = field(default_factory=list)


def _entry_request(entry: MenuEntry) -> ActionRequest:
    return ActionRequest(kind=entry.kind, index=entry.index, raw="")


def _decision_from_entry(entry: MenuEntry, source: str, **kwargs) -> PolicyDecision:
    return PolicyDecision(
        action=entry.action, request=_entry_request(entry), source=source, **kwargs
    )


class RandomPolicy:
    """Uniform over the currently valid actions; never invalid by design."""

    name = SOURCE_RANDOM

    def decide(self, obs: Observation, rng: random.Random) -> PolicyDecision:
        entry = rng.choice(obs.menu.entries)
        return _decision_from_entry(entry, SOURCE_RANDOM)


class HeuristicPolicy:
    """Greedy damage with a low-HP potion rule.

    Ranks damaging moves by power x type effectiveness x same-type bonus
    x accuracy. Drinks a potion on the active monster when its HP falls
    under a quarter and the bag allows it. On a forced switch it sends
    the bench member with the best matchup. Never runs.
    """

    name = SOURCE_HEURISTIC

    def __init__(self, rules: Ruleset):
        self.rules = rules

    def _move_score(self, move: MoveSpec, attacker: Monster, defender: Monster) -> float:
        if not move.is_damaging:
            return 0.0
        effectiveness = type_effectiveness(
            self.rules, move.move_type, defender.species.types
        )
        stab = STAB_FACTOR if move.move_type in attacker.species.types else 1.0
        accuracy = 1.0 if move.accuracy is None else move.accuracy / 100
        return move.power * effectiveness * stab * accuracy

    def _best_move_entry(
        self, obs: Observation, entries: Sequence[MenuEntry]
    ) -> Optional[MenuEntry]:
        state = obs.state
        best: Optional[tuple[float, MenuEntry]] = None
        for entry in entries:
            action = entry.action
            if action.move_slot is None:
                score = 50.0  # Struggle: scored as a plain 50-power hit
            else:
                move = state.active.moves[action.move_slot].move
                score = self._move_score(move, state.active, state.enemy)
            if best is None or score > best[0]:
                best = (score, entry)
        if best is None:
            return None
        score, entry = best
        if score > 0:
            return entry
        # Nothing deals damage (all immune or status-only): fall back to
        # the first move on the menu to keep pressure on PP.
        return entries[0]

    def decide(self, obs: Observation, rng: random.Random) -> PolicyDecision:
        state = obs.state
        entries = obs.menu.entries

        if state.forced_switch_pending:
            switch_entries = [e for e in entries if e.kind is ActionKind.SWITCH]

            def matchup(entry: MenuEntry) -> float:
                member = state.party[entry.action.party_index]
                scores = [
                    self._move_score(slot.move, member, state.enemy)
                    for slot in member.moves
                    if slot.usable
                ]
                return max(scores, default=0.0)

            best = max(switch_entries, key=matchup)
            return _decision_from_entry(best, SOURCE_HEURISTIC)

        active = state.active
        if active.current_hp < active.max_hp * LOW_HP_FRACTION:
            potion_on_active = [
                e
                for e in entries
                if e.kind is ActionKind.ITEM
                and e.action.party_index == state.active_index
            ]
            if potion_on_active:
                return _decision_from_entry(potion_on_active[0], SOURCE_HEURISTIC)

        move_entries = [e for e in entries if e.kind is ActionKind.MOVE]
        best_move = self._best_move_entry(obs, move_entries)
        if best_move is not None:
            return _decision_from_entry(best_move, SOURCE_HEURISTIC)
        # No moves at all should be impossible (Struggle fills the gap),
        # but stay safe: take whatever the menu offers first.
        return _decision_from_entry(entries[0], SOURCE_HEURISTIC)


class MemoryAwarePolicy:
    """Heuristic play, except a remembered defeat can trigger a retreat."""

    name = SOURCE_HEURISTIC

    def __init__(self, rules: Ruleset):
        self._heuristic = HeuristicPolicy(rules)

    def decide(self, obs: Observation, rng: random.Random) -> PolicyDecision:
        recommended = memory_aware_rule(obs.state, obs.memory_results, obs.menu)
        if recommended is not None:
            for entry in obs.menu.entries:
                if entry.action == recommended:
                    return _decision_from_entry(entry, SOURCE_MEMORY)
        return self._heuristic.decide(obs, rng)


class HumanPolicy:
    """Interactive console play: shows the prompt, reads a menu number."""

    name = SOURCE_HUMAN

    def __init__(
        self,
        input_fn: Callable[[], str] = input,
        output_fn: Callable[[str], None] = print,
    ):
        self.input_fn = input_fn
        self.output_fn = output_fn

    def decide(self, obs: Observation, rng: random.Random) -> PolicyDecision:
        self.output_fn(obs.prompt)
        self.output_fn("")
        for position, entry in enumerate(obs.menu.entries, start=1):
            self.output_fn(f"  [{position}] {entry.label}")
        while True:
            try:
                raw = self.input_fn()
            except EOFError as exc:
                raise InteractiveAbort("input closed") from exc
            choice = raw.strip()
            if choice.isdigit() and 1 <= int(choice) <= len(obs.menu.entries):
                entry = obs.menu.entries[int(choice) - 1]
                return _decision_from_entry(entry, SOURCE_HUMAN)
            self.output_fn(
                f"  enter a number between 1 and {len(obs.menu.entries)}"
            )


class LlmPolicy:
    """Prompts a chat model and maps its JSON reply onto the menu.

    A reply that fails to parse or names an invalid action is retried
    with the error appended to the prompt, up to ``max_retries`` times;
    after that (or if the transport gives up) the decision falls back to
    a uniformly random valid action with ``source="fallback"``.
    """

    name = SOURCE_LLM

    def __init__(self, config: LlmEndpointConfig, transport: Transport):
        self.config = config
        self.transport = transport

    def decide(self, obs: Observation, rng: random.Random) -> PolicyDecision:
        attempts: list[InvalidAttempt] = []
        user_text = obs.prompt
        latency_ms = 0
        for attempt in range(self.config.max_retries + 1):
            payload = build_chat_request(self.config, obs.system_text, user_text)
            started = time.perf_counter()
            try:
                body = self.transport.send(payload)
                content = extract_content(body)
            except TransportUnavailable as exc:
                latency_ms += int((time.perf_counter() - started) * 1000)
                attempts.append(InvalidAttempt(f"transport: {exc}", ""))
                break  # the transport already retried; go to fallback
            latency_ms += int((time.perf_counter() - started) * 1000)
            try:
                request = parse_action(content)
                action = validate_action(request, obs.menu)
            except ParseError as exc:
                attempts.append(InvalidAttempt(f"parse-error: {exc}", content))
                user_text = obs.prompt + RETRY_NOTICE.format(error=exc)
                continue
            except InvalidActionError as exc:
                attempts.append(InvalidAttempt(f"invalid-action: {exc}", content))
                user_text = obs.prompt + RETRY_NOTICE.format(error=exc)
                continue
            return PolicyDecision(
                action=action,
                request=request,
                source=SOURCE_LLM,
                retries_used=attempt,
                latency_ms=latency_ms,
                invalid_attempts=attempts,
            )
        entry = rng.choice(obs.menu.entries)
        decision = _decision_from_entry(
            entry,
            SOURCE_FALLBACK,
            retries_used=self.config.max_retries,
            latency_ms=latency_ms,
        )
        decision.invalid_attempts = attempts
        return decision
