"""Turn resolution and battle-level operations.

RNG draw order is part of the engine contract (replays depend on it):

1. ``resolve_turn`` draws once for move order, only when both sides use
   moves of equal priority and equal effective speed.
2. Per move use, in order: full-paralysis roll (0.25), confusion
   self-hit roll (0.5), accuracy roll (skipped when accuracy is null),
   critical roll, damage random factor, then status-duration roll for a
   freshly applied sleep/confusion. Sleep ticks consume no draw, and an
   immune target short-circuits before the critical roll.
3. ``attempt_escape`` draws once, only when the formula does not already
   guarantee success.

Every mutation is mirrored into the returned events; see
``events.replay_events``.
"""

from __future__ import annotations

import random
from typing import Optional

from pokegauntlet.engine.events import BattleEvent, EventKind, Side
from pokegauntlet.engine.mechanics import (
    Ruleset,
    compute_damage,
    staged_stat,
    type_effectiveness,
    _ratio_for,
)
from pokegauntlet.engine.model import (
    Action,
    ActionKind,
    BattleOutcome,
    BattleState,
    EffectKind,
    Monster,
    MoveSpec,
    StatName,
    StatusKind,
)


class AblationMaskProtocol:
    """Shape expected from agentio.AblationMask; avoids a layer cycle."""

    allow_strategic_switch: bool
    allow_item: bool
    allow_escape: bool


FULL_PARALYSIS_CHANCE = 0.25
CONFUSION_SELF_HIT_CHANCE = 0.5
STATUS_DURATION_MIN = 1
STATUS_DURATION_MAX = 4


def effective_speed(rules: Ruleset, monster: Monster) -> int:
    """Speed after stage modifier; paralysis then quarters it."""
    value = staged_stat(rules, monster.speed, monster.stages.get(StatName.SPEED))
    if monster.status.kind is StatusKind.PARALYSIS:
        value = max(1, value // 4)
    return value


def critical_check(attacker: Monster, rng: random.Random) -> bool:
    """One draw; chance is floor(base_speed / 2) out of 256."""
    threshold = attacker.species.base_speed // 2
    return rng.randrange(256) < threshold


def accuracy_check(
    rules: Ruleset,
    attacker: Monster,
    defender: Monster,
    move: MoveSpec,
    rng: random.Random,
) -> bool:
    """Exactly one draw per check; moves with null accuracy never miss
    and consume no draw."""
    if move.accuracy is None:
        return True
    acc_num, acc_den = _ratio_for(
        rules.accuracy_stage_ratios, attacker.stages.get(StatName.ACCURACY)
    )
    eva_num, eva_den = _ratio_for(
        rules.accuracy_stage_ratios, defender.stages.get(StatName.EVASION)
    )
    chance = (move.accuracy / 100) * (acc_num / acc_den) / (eva_num / eva_den)
    chance = min(1.0, max(0.0, chance))
    return rng.random() < chance


def _confusion_self_damage(rules: Ruleset, monster: Monster) -> int:
    """Typeless 40-power physical hit against itself: own attack versus
    own defense with stages, no critical, no STAB, no random factor."""
    attack = staged_stat(rules, monster.attack, monster.stages.get(StatName.ATTACK))
    defense = staged_stat(rules, monster.defense, monster.stages.get(StatName.DEFENSE))
    return ((2 * monster.level // 5 + 2) * 40 * attack // max(1, defense)) // 50 + 2


def valid_actions(state: BattleState, mask: AblationMaskProtocol) -> list[Action]:
    """Dynamically valid actions, in stable presentation order.

    During a pending forced switch only switches are offered, regardless
    of the mask. Struggle appears as the single move option when every
    move is out of PP.
    """
    if state.is_over:
        return []
    bench = state.bench_indices()
    if state.forced_switch_pending:
        return [Action(ActionKind.SWITCH, party_index=i) for i in bench]

    actions: list[Action] = []
    usable = [i for i, slot in enumerate(state.active.moves) if slot.usable]
    if usable:
        actions.extend(Action(ActionKind.MOVE, move_slot=i) for i in usable)
    else:
        actions.append(Action(ActionKind.MOVE, move_slot=None))
    if mask.allow_strategic_switch:
        actions.extend(Action(ActionKind.SWITCH, party_index=i) for i in bench)
    if mask.allow_item and state.bag.potions > 0:
        actions.extend(
            Action(ActionKind.ITEM, party_index=i, item="potion")
            for i, member in enumerate(state.party)
            if not member.fainted
        )
    if mask.allow_escape:
        actions.append(Action(ActionKind.RUN))
    return actions


def enemy_policy(state: BattleState, rng: random.Random) -> Action:
    """Wild behaviour: a uniformly random usable move, Struggle when
    nothing has PP. Consumes one draw unless forced to Struggle."""
    usable = [i for i, slot in enumerate(state.enemy.moves) if slot.usable]
    if not usable:
        return Action(ActionKind.MOVE, move_slot=None)
    return Action(ActionKind.MOVE, move_slot=rng.choice(usable))


def apply_item(state: BattleState, item: str, target_index: int) -> list[BattleEvent]:
    """Use a potion on a party member; restores up to 20 HP."""
    if item != "potion":
        raise ValueError(f"unknown item {item!r}")
    if state.bag.potions <= 0:
        raise ValueError("no potions left")
    target = state.party[target_index]
    if target.fainted:
        raise ValueError(f"{target.name} has fainted; potions cannot revive")
    state.bag.potions -= 1
    gained = target.heal(state.bag.POTION_HEAL)
    return [
        BattleEvent(
            EventKind.ITEM_USED,
            side=Side.PLAYER,
            name=target.name,
            item="potion",
            amount=gained,
            hp_left=target.current_hp,
            party_index=target_index,
            potions_left=state.bag.potions,
        )
    ]


def perform_switch(
    state: BattleState, party_index: int, *, forced: bool
) -> list[BattleEvent]:
    """Swap the active monster.

    The outgoing monster loses its stages and any confusion; the incoming
    one enters with fresh stages. Sleep and paralysis stay put.
    """
    if party_index == state.active_index:
        raise ValueError("target is already active")
    incoming = state.party[party_index]
    if incoming.fainted:
        raise ValueError(f"{incoming.name} has fainted")
    outgoing = state.active
    outgoing.stages.reset()
    if outgoing.status.kind is StatusKind.CONFUSION:
        outgoing.status.clear()
    state.active_index = party_index
    incoming.enter_battle()
    state.forced_switch_pending = False
    return [
        BattleEvent(
            EventKind.SWITCHED,
            side=Side.PLAYER,
            name=incoming.name,
            party_index=party_index,
            forced=forced,
        )
    ]


def attempt_escape(
    rules: Ruleset, state: BattleState, rng: random.Random
) -> tuple[list[BattleEvent], bool]:
    """Wild-battle escape formula.

    A = player effective speed, B = (enemy effective speed // 4) % 256,
    C = prior failed attempts + 1. B == 0 or F = A*32//B + 30*C > 255
    succeed outright with no draw; otherwise succeed when a single
    uniform draw from [0, 255] is < F. Failure increments the counter.
    """
    a = effective_speed(rules, state.active)
    b = (effective_speed(rules, state.enemy) // 4) % 256
    c = state.escape_attempts + 1
    if b == 0:
        success = True
    else:
        f = a * 32 // b + 30 * c
        success = f > 255 or rng.randint(0, 255) < f
    if not success:
        state.escape_attempts += 1
    events = [
        BattleEvent(
            EventKind.ESCAPE_ATTEMPTED,
            side=Side.PLAYER,
            success=success,
            attempts=state.escape_attempts,
        )
    ]
    if success:
        state.outcome = BattleOutcome.ESCAPED
        events.append(
            BattleEvent(EventKind.BATTLE_ENDED, outcome=BattleOutcome.ESCAPED)
        )
    return events, success


def _sides(state: BattleState, side: Side) -> tuple[Monster, Monster]:
    if side is Side.PLAYER:
        return state.active, state.enemy
    return state.enemy, state.active


def _check_faints(state: BattleState, events: list[BattleEvent]) -> None:
    """Resolve faints after some damage was applied. Enemy faint wins the
    battle even if the player fainted in the same exchange (recoil)."""
    if state.is_over:
        return
    if state.enemy.fainted:
        events.append(
            BattleEvent(EventKind.FAINTED, side=Side.ENEMY, name=state.enemy.name)
        )
        state.outcome = BattleOutcome.WIN
        state.forced_switch_pending = False
        events.append(BattleEvent(EventKind.BATTLE_ENDED, outcome=BattleOutcome.WIN))
        return
    if state.active.fainted:
        if state.party_defeated():
            events.append(
                BattleEvent(EventKind.FAINTED, side=Side.PLAYER, name=state.active.name)
            )
            state.outcome = BattleOutcome.LOSS
            events.append(
                BattleEvent(EventKind.BATTLE_ENDED, outcome=BattleOutcome.LOSS)
            )
        else:
            # Battle pauses for a forced switch; the enemy does not act on it.
            state.forced_switch_pending = True
            events.append(
                BattleEvent(
                    EventKind.FAINTED,
                    side=Side.PLAYER,
                    name=state.active.name,
                    forced=True,
                )
            )


def _use_move(
    rules: Ruleset,
    state: BattleState,
    side: Side,
    action: Action,
    rng: random.Random,
    events: list[BattleEvent],
) -> None:
    attacker, defender = _sides(state, side)

    status = attacker.status
    if status.kind is StatusKind.SLEEP:
        status.turns_left -= 1
        if status.turns_left <= 0:
            status.clear()
            events.append(
                BattleEvent(EventKind.WOKE_UP, side=side, name=attacker.name)
            )
        else:
            events.append(
                BattleEvent(
                    EventKind.SLEPT,
                    side=side,
                    name=attacker.name,
                    turns_left=status.turns_left,
                )
            )
        return  # waking up still consumes the turn
    if status.kind is StatusKind.PARALYSIS:
        if rng.random() < FULL_PARALYSIS_CHANCE:
            events.append(
                BattleEvent(EventKind.FULLY_PARALYZED, side=side, name=attacker.name)
            )
            return
    elif status.kind is StatusKind.CONFUSION:
        status.turns_left -= 1
        if status.turns_left <= 0:
            status.clear()
            events.append(
                BattleEvent(EventKind.CONFUSION_ENDED, side=side, name=attacker.name)
            )
        else:
            events.append(
                BattleEvent(
                    EventKind.CONFUSED,
                    side=side,
                    name=attacker.name,
                    turns_left=status.turns_left,
                )
            )
            if rng.random() < CONFUSION_SELF_HIT_CHANCE:
                damage = _confusion_self_damage(rules, attacker)
                attacker.take_damage(damage)
                events.append(
                    BattleEvent(
                        EventKind.HURT_ITSELF,
                        side=side,
                        name=attacker.name,
                        damage=damage,
                        hp_left=attacker.current_hp,
                    )
                )
                _check_faints(state, events)
                return

    is_struggle = action.move_slot is None
    if is_struggle:
        move = rules.struggle
        slot_index: Optional[int] = None
        pp_left: Optional[int] = None
    else:
        slot = attacker.moves[action.move_slot]
        if not slot.usable:
            raise ValueError(f"{attacker.name} has no PP left for {slot.move.name}")
        slot.pp -= 1
        move = slot.move
        slot_index = action.move_slot
        pp_left = slot.pp

    events.append(
        BattleEvent(
            EventKind.MOVE_USED,
            side=side,
            name=attacker.name,
            move=move.display_name,
            slot=slot_index,
            pp_left=pp_left,
        )
    )

    if not accuracy_check(rules, attacker, defender, move, rng):
        events.append(
            BattleEvent(EventKind.MOVE_MISSED, side=side, name=attacker.name)
        )
        return

    if move.is_damaging:
        effectiveness = type_effectiveness(rules, move.move_type, defender.species.types)
        if effectiveness == 0.0:
            events.append(
                BattleEvent(EventKind.NO_EFFECT, side=~side, name=defender.name)
            )
            return
        critical = critical_check(attacker, rng)
        damage = compute_damage(
            rules, attacker, defender, move, critical=critical, rng=rng
        )
        dealt = defender.take_damage(damage)
        events.append(
            BattleEvent(
                EventKind.DAMAGE_DEALT,
                side=~side,
                name=defender.name,
                move=move.display_name,
                damage=dealt,
                critical=critical,
                effectiveness=effectiveness,
                hp_left=defender.current_hp,
            )
        )
        effect = move.effect
        if effect.kind is EffectKind.DRAIN and dealt > 0:
            # ceil(dealt * fraction): draining always rounds up
            heal = -(-dealt * effect.drain_numerator // effect.drain_denominator)
            gained = attacker.heal(heal)
            events.append(
                BattleEvent(
                    EventKind.DRAINED,
                    side=side,
                    name=attacker.name,
                    amount=gained,
                    hp_left=attacker.current_hp,
                )
            )
        if is_struggle and dealt > 0:
            recoil = dealt // 2
            if recoil > 0:
                attacker.take_damage(recoil)
                events.append(
                    BattleEvent(
                        EventKind.RECOIL,
                        side=side,
                        name=attacker.name,
                        damage=recoil,
                        hp_left=attacker.current_hp,
                    )
                )
        _check_faints(state, events)
        return

    # Status move behaviour
    effect = move.effect
    if effect.kind in (EffectKind.LOWER_STAT, EffectKind.RAISE_STAT):
        if effect.kind is EffectKind.LOWER_STAT:
            target, target_side = defender, ~side
            delta = -effect.stages
        else:
            target, target_side = attacker, side
            delta = effect.stages
        applied = target.stages.apply(effect.stat, delta)
        if applied == 0:
            events.append(
                BattleEvent(
                    EventKind.STAT_CHANGE_FAILED,
                    side=target_side,
                    name=target.name,
                    stat=effect.stat,
                )
            )
        else:
            events.append(
                BattleEvent(
                    EventKind.STAT_CHANGED,
                    side=target_side,
                    name=target.name,
                    stat=effect.stat,
                    delta=applied,
                    new_stage=target.stages.get(effect.stat),
                )
            )
    elif effect.kind in (EffectKind.SLEEP, EffectKind.PARALYZE, EffectKind.CONFUSE):
        if not defender.status.is_clear:
            events.append(
                BattleEvent(
                    EventKind.STATUS_BLOCKED, side=~side, name=defender.name
                )
            )
            return
        kind = {
            EffectKind.SLEEP: StatusKind.SLEEP,
            EffectKind.PARALYZE: StatusKind.PARALYSIS,
            EffectKind.CONFUSE: StatusKind.CONFUSION,
        }[effect.kind]
        turns = 0
        if kind in (StatusKind.SLEEP, StatusKind.CONFUSION):
            turns = rng.randint(STATUS_DURATION_MIN, STATUS_DURATION_MAX)
        defender.status.kind = kind
        defender.status.turns_left = turns
        events.append(
            BattleEvent(
                EventKind.STATUS_APPLIED,
                side=~side,
                name=defender.name,
                status=kind,
                turns_left=turns or None,
            )
        )
    # EffectKind.NONE on a status move would be inert; data validation
    # rejects it, so there is no branch for it here.


def _move_order(
    rules: Ruleset,
    state: BattleState,
    player_move: MoveSpec,
    enemy_move: MoveSpec,
    rng: random.Random,
) -> tuple[Side, Side]:
    if player_move.priority != enemy_move.priority:
        first = Side.PLAYER if player_move.priority > enemy_move.priority else Side.ENEMY
    else:
        player_speed = effective_speed(rules, state.active)
        enemy_speed = effective_speed(rules, state.enemy)
        if player_speed != enemy_speed:
            first = Side.PLAYER if player_speed > enemy_speed else Side.ENEMY
        else:
            first = Side.PLAYER if rng.random() < 0.5 else Side.ENEMY
    return (first, ~first)


def _move_for(rules: Ruleset, monster: Monster, action: Action) -> MoveSpec:
    if action.move_slot is None:
        return rules.struggle
    return monster.moves[action.move_slot].move


def resolve_turn(
    rules: Ruleset,
    state: BattleState,
    player_action: Action,
    enemy_action: Action,
    rng: random.Random,
) -> list[BattleEvent]:
    """Resolve one full turn and return its event log.

    Player item, switch, and escape actions resolve before any move. A
    successful escape ends the battle before the enemy acts; a failed one
    forfeits the player's move. When a side faints, its pending move is
    skipped. The forced-switch decision after a player faint is handled
    separately by ``resolve_forced_switch``.
    """
    if state.is_over:
        raise ValueError("battle is already over")
    if state.forced_switch_pending:
        raise ValueError("a forced switch must be resolved first")
    if enemy_action.kind is not ActionKind.MOVE:
        raise ValueError("the enemy can only use moves")

    events = [BattleEvent(EventKind.TURN_STARTED, turn_number=state.turn_number)]

    pending: list[tuple[Side, Action]]
    if player_action.kind is ActionKind.MOVE:
        order = _move_order(
            rules,
            state,
            _move_for(rules, state.active, player_action),
            _move_for(rules, state.enemy, enemy_action),
            rng,
        )
        by_side = {Side.PLAYER: player_action, Side.ENEMY: enemy_action}
        pending = [(side, by_side[side]) for side in order]
    else:
        if player_action.kind is ActionKind.ITEM:
            events.extend(apply_item(state, player_action.item, player_action.party_index))
        elif player_action.kind is ActionKind.SWITCH:
            events.extend(
                perform_switch(state, player_action.party_index, forced=False)
            )
        elif player_action.kind is ActionKind.RUN:
            escape_events, success = attempt_escape(rules, state, rng)
            events.extend(escape_events)
            if success:
                return events
        pending = [(Side.ENEMY, enemy_action)]

    for side, action in pending:
        if state.is_over or state.forced_switch_pending:
            break  # the fainted (or finished) side's pending move is skipped
        actor = state.active if side is Side.PLAYER else state.enemy
        if actor.fainted:
            continue
        _use_move(rules, state, side, action, rng, events)

    if not state.is_over and not state.forced_switch_pending:
        state.turn_number += 1
        events.append(
            BattleEvent(EventKind.TURN_ENDED, turn_number=state.turn_number)
        )
    return events


def resolve_forced_switch(state: BattleState, party_index: int) -> list[BattleEvent]:
    """Send in a replacement after a faint.

    This is its own decision point: the enemy does not act, and the turn
    counter does not advance until the following full turn resolves.
    """
    if not state.forced_switch_pending:
        raise ValueError("no forced switch is pending")
    events = perform_switch(state, party_index, forced=True)
    state.turn_number += 1
    events.append(BattleEvent(EventKind.TURN_ENDED, turn_number=state.turn_number))
    return events
