"""Policy behaviour: random, heuristic, memory-aware, human, and LLM."""

from __future__ import annotations

import random
from collections import Counter

import pytest

from pokegauntlet.agentio import AblationMask, build_action_menu
from pokegauntlet.engine.model import ActionKind, TypeId
from pokegauntlet.llm import (
    CallableTransport,
    EndpointConfigError,
    LlmEndpointConfig,
    TransportUnavailable,
)
from pokegauntlet.memory import BattleEntities, MemoryRecord
from pokegauntlet.policies import (
    RETRY_NOTICE,
    SOURCE_FALLBACK,
    SOURCE_HEURISTIC,
    SOURCE_LLM,
    SOURCE_MEMORY,
    HeuristicPolicy,
    HumanPolicy,
    InteractiveAbort,
    LlmPolicy,
    MemoryAwarePolicy,
    Observation,
    RandomPolicy,
)

from .helpers import make_monster, make_move, make_species, make_state


def observe(state, mask: AblationMask = AblationMask(), **kwargs) -> Observation:
    menu = build_action_menu(state, mask)
    return Observation(
        state=state, menu=menu, mask=mask, prompt="<prompt>", **kwargs
    )


class TestRandomPolicy:
    def test_always_on_menu_and_uniform(self):
        state = make_state(potions=1)
        obs = observe(state)
        rng = random.Random(11)
        counts = Counter()
        n = 20_000
        for _ in range(n):
            decision = RandomPolicy().decide(obs, rng)
            assert decision.action in obs.menu.actions
            assert decision.source == "random"
            counts[decision.action] += 1
        expected = 1 / len(obs.menu.entries)
        for action in obs.menu.actions:
            assert counts[action] / n == pytest.approx(expected, abs=0.02)


def water_vs_rock_state(**state_kwargs):
    """Active water monster with a weak STAB option against rock/ground."""
    bubble = make_move(name="bubble", move_type=TypeId.WATER, power=20)
    tackle = make_move(name="tackle", move_type=TypeId.NORMAL, power=40)
    attacker = make_monster(
        species=make_species(name="squirtle", types=(TypeId.WATER,)),
        moves=[tackle, bubble],
    )
    enemy = make_monster(
        species=make_species(name="geodude", types=(TypeId.ROCK, TypeId.GROUND)),
        moves=[make_move(name="pound")],
    )
    bench = make_monster(name="bench")
    return make_state(party=[attacker, bench], enemy=enemy, **state_kwargs)


class TestHeuristicPolicy:
    def test_prefers_effective_stab_over_raw_power(self, rules):
        # 20 power x4 effectiveness x1.5 same-type beats a plain 40.
        state = water_vs_rock_state()
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert decision.source == SOURCE_HEURISTIC
        assert decision.action.kind is ActionKind.MOVE
        assert state.active.moves[decision.action.move_slot].move.name == "bubble"

    def test_accuracy_discount_applies(self, rules):
        # 60 power at 50% accuracy scores under 40 power at 100%.
        wild = make_move(name="wild-swing", power=60, accuracy=50)
        steady = make_move(name="steady-hit", power=40, accuracy=100)
        state = make_state(
            party=[make_monster(moves=[wild, steady]), make_monster(name="bench")]
        )
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert state.active.moves[decision.action.move_slot].move.name == "steady-hit"

    def test_drinks_potion_when_low(self, rules):
        state = water_vs_rock_state(potions=2)
        state.active.current_hp = max(1, state.active.max_hp // 5)
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert decision.action.kind is ActionKind.ITEM
        assert decision.action.party_index == state.active_index

    def test_no_potion_above_threshold(self, rules):
        state = water_vs_rock_state(potions=2)
        state.active.current_hp = state.active.max_hp // 2
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert decision.action.kind is ActionKind.MOVE

    def test_low_hp_without_potion_attacks(self, rules):
        state = water_vs_rock_state(potions=0)
        state.active.current_hp = 1
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert decision.action.kind is ActionKind.MOVE

    def test_forced_switch_best_matchup(self, rules):
        ember = make_move(name="ember", move_type=TypeId.FIRE, power=40)
        gust = make_move(name="gust", move_type=TypeId.FLYING, power=40)
        fainted = make_monster(name="down")
        fainted.current_hp = 0
        # Plain normal typing keeps gust without the same-type bonus.
        flier = make_monster(
            species=make_species(name="pidgey", types=(TypeId.NORMAL,)),
            moves=[gust],
        )
        firebrand = make_monster(
            species=make_species(name="charmander", types=(TypeId.FIRE,)),
            moves=[ember],
        )
        enemy = make_monster(
            species=make_species(name="paras", types=(TypeId.BUG, TypeId.GRASS)),
            moves=[make_move(name="scratch")],
        )
        state = make_state(party=[fainted, flier, firebrand], enemy=enemy)
        state.forced_switch_pending = True
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert decision.action.kind is ActionKind.SWITCH
        # Both hit bug/grass at x4; only the fire user adds the
        # same-type bonus, so it wins the matchup.
        assert decision.action.party_index == 2

    def test_never_runs_even_when_helpless(self, rules):
        # A normal move against a ghost scores zero; the policy keeps
        # attacking instead of fleeing.
        ghost = make_monster(
            species=make_species(name="gastly", types=(TypeId.GHOST,)),
            moves=[make_move(name="lick", move_type=TypeId.GHOST)],
        )
        state = make_state(enemy=ghost, potions=1)
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert decision.action.kind is ActionKind.MOVE

    def test_struggle_when_pp_gone(self, rules):
        state = water_vs_rock_state()
        for slot in state.active.moves:
            slot.pp = 0
        decision = HeuristicPolicy(rules).decide(observe(state), random.Random(0))
        assert decision.action.is_struggle


class TestMemoryAwarePolicy:
    def _loss_record(self, species: str, level: int):
        record = MemoryRecord(
            id="m1",
            text=f"lost to {species}",
            outcome="lost",
            entities=BattleEntities(enemy_species=species, enemy_level=level),
            created_at="",
        )
        return (record, 3.0)

    def test_runs_from_remembered_defeat(self, rules):
        state = make_state(enemy=make_monster(name="geodude", level=10))
        obs = observe(state, memory_results=(self._loss_record("geodude", 9),))
        decision = MemoryAwarePolicy(rules).decide(obs, random.Random(0))
        assert decision.action.kind is ActionKind.RUN
        assert decision.source == SOURCE_MEMORY

    def test_falls_back_to_heuristic(self, rules):
        state = make_state(enemy=make_monster(name="geodude", level=10))
        obs = observe(state, memory_results=(self._loss_record("onix", 9),))
        decision = MemoryAwarePolicy(rules).decide(obs, random.Random(0))
        assert decision.source == SOURCE_HEURISTIC
        assert decision.action.kind is ActionKind.MOVE


class TestHumanPolicy:
    def test_reads_menu_number(self):
        state = make_state()
        obs = observe(state)
        replies = iter(["bogus", "99", "2"])
        printed: list[str] = []
        policy = HumanPolicy(input_fn=lambda: next(replies), output_fn=printed.append)
        decision = policy.decide(obs, random.Random(0))
        assert decision.action == obs.menu.entries[1].action
        assert decision.source == "human"
        assert any("enter a number" in line for line in printed)
        assert printed[0] == "<prompt>"

    def test_eof_aborts(self):
        state = make_state()
        obs = observe(state)

        def no_input() -> str:
            raise EOFError

        policy = HumanPolicy(input_fn=no_input, output_fn=lambda _: None)
        with pytest.raises(InteractiveAbort):
            policy.decide(obs, random.Random(0))


def reply_sequence(*texts: str):
    """A responder that plays the given texts in order."""
    queue = list(texts)

    def responder(payload: dict) -> str:
        assert queue, "model asked for more replies than scripted"
        return queue.pop(0)

    return responder


def llm_policy(responder, **config_kwargs) -> LlmPolicy:
    config = LlmEndpointConfig(
        base_url="http://example.invalid",
        model_name="test-model",
        max_retries=2,
        **config_kwargs,
    )
    return LlmPolicy(config, CallableTransport(responder))


class TestLlmPolicy:
    def test_clean_reply(self):
        state = make_state()
        obs = observe(state, system_text="be brief")
        seen_payloads = []

        def responder(payload):
            seen_payloads.append(payload)
            return '{"action": "move", "index": 1}'

        decision = llm_policy(responder).decide(obs, random.Random(0))
        assert decision.source == SOURCE_LLM
        assert decision.retries_used == 0
        assert decision.invalid_attempts == []
        assert decision.action.kind is ActionKind.MOVE
        payload = seen_payloads[0]
        assert payload["model"] == "test-model"
        assert payload["temperature"] == 0.0
        assert payload["messages"][0] == {"role": "system", "content": "be brief"}
        assert payload["messages"][1]["content"] == "<prompt>"

    def test_parse_error_retries_with_notice(self):
        state = make_state()
        obs = observe(state)
        seen = []

        def responder(payload):
            seen.append(payload["messages"][1]["content"])
            if len(seen) == 1:
                return "I charge in bravely!"
            return '{"action": "move", "index": 1}'

        decision = llm_policy(responder).decide(obs, random.Random(0))
        assert decision.source == SOURCE_LLM
        assert decision.retries_used == 1
        assert len(decision.invalid_attempts) == 1
        assert decision.invalid_attempts[0].reason.startswith("parse-error")
        assert "could not be used" in seen[1]
        assert seen[1].startswith("<prompt>")
        notice_prefix = RETRY_NOTICE.split("{error}")[0].strip()
        assert notice_prefix.split()[0] in seen[1]

    def test_invalid_action_retries(self):
        state = make_state(potions=0)
        obs = observe(state)
        responder = reply_sequence(
            '{"action": "item", "index": 1}', '{"action": "run"}'
        )
        decision = llm_policy(responder).decide(obs, random.Random(0))
        assert decision.source == SOURCE_LLM
        assert decision.retries_used == 1
        assert decision.invalid_attempts[0].reason.startswith("invalid-action")
        assert decision.action.kind is ActionKind.RUN

    def test_fallback_after_retry_budget(self):
        state = make_state()
        obs = observe(state)
        transport = CallableTransport(lambda payload: "never valid")
        config = LlmEndpointConfig(
            base_url="http://example.invalid", model_name="m", max_retries=2
        )
        decision = LlmPolicy(config, transport).decide(obs, random.Random(5))
        assert decision.source == SOURCE_FALLBACK
        assert decision.retries_used == 2
        assert transport.calls_made == 3  # initial try plus two retries
        assert len(decision.invalid_attempts) == 3
        assert decision.action in obs.menu.actions

    def test_transport_outage_falls_back(self):
        state = make_state()
        obs = observe(state)
        calls = []

        def responder(payload):
            calls.append(payload)
            raise TransportUnavailable("gone")

        decision = llm_policy(responder).decide(obs, random.Random(0))
        assert decision.source == SOURCE_FALLBACK
        assert len(calls) == 1  # no point retrying a dead transport
        assert decision.invalid_attempts[0].reason.startswith("transport")

    def test_endpoint_config_error_propagates(self):
        state = make_state()
        obs = observe(state)

        def responder(payload):
            raise EndpointConfigError("bad key")

        with pytest.raises(EndpointConfigError, match="bad key"):
            llm_policy(responder).decide(obs, random.Random(0))

    def test_raw_reply_truncated_in_log(self):
        state = make_state()
        obs = observe(state)
        long_reply = "x" * 2000
        responder = reply_sequence(long_reply, '{"action": "run"}')
        decision = llm_policy(responder).decide(obs, random.Random(0))
        logged = decision.invalid_attempts[0].as_dict()
        assert len(logged["raw"]) == 500
