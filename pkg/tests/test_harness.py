"""Runner, aggregation, logging, ablations, and the memory pilot."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from pokegauntlet import rng as streams
from pokegauntlet.agentio import AblationMask, PromptTemplate
from pokegauntlet.engine.model import Bag
from pokegauntlet.harness import (
    CANONICAL_DROP_KEYS,
    DISTRIBUTION_KEYS,
    EpisodeResult,
    GauntletRunner,
    RunConfig,
    RunConfigError,
    action_distribution,
    ablation_sweep,
    canonical_log,
    compute_metrics,
    drop_volatile,
    normalize_distribution,
    read_turn_records,
    repeat_and_aggregate,
    resolve_run_dir,
    run_memory_pilot,
)
from pokegauntlet.paths import default_prompt_path
from pokegauntlet.policies import HeuristicPolicy
from pokegauntlet.scenario import Checkpoint, load_checkpoint, load_encounter_table

from .helpers import make_monster


def episode(rep: int, wins: int, battles: int = 50, losses: int = 0) -> EpisodeResult:
    result = EpisodeResult(repetition=rep)
    result.outcomes = ["win"] * wins + ["loss"] * losses
    result.outcomes += ["escaped"] * (battles - wins - losses)
    return result


class TestMetrics:
    def test_pooled_mean_is_exact(self):
        wins = [41, 40, 40, 41, 40, 40, 41, 40, 41, 40]
        assert sum(wins) == 404
        episodes = [episode(i, w) for i, w in enumerate(wins)]
        metrics = compute_metrics(episodes, 50)
        assert metrics.total_wins == 404
        assert metrics.mean_win_rate == 0.808

    def test_single_repetition_exact(self):
        metrics = compute_metrics([episode(0, 43)], 50)
        assert metrics.mean_win_rate == 0.86
        assert metrics.sem_win_rate == 0.0

    def test_sem_two_repetitions(self):
        metrics = compute_metrics([episode(0, 40), episode(1, 45)], 50)
        # stdev([0.8, 0.9]) / sqrt(2) collapses to 0.05.
        assert metrics.sem_win_rate == pytest.approx(0.05, abs=1e-12)

    def test_totals_cover_outcomes(self):
        episodes = [episode(0, 2, battles=5, losses=1)]
        episodes[0].outcomes[-1] = "forfeited"
        metrics = compute_metrics(episodes, 5)
        assert metrics.totals["battles"] == 5
        assert metrics.totals["wins"] == 2
        assert metrics.totals["losses"] == 1
        assert metrics.totals["escaped"] == 1
        assert metrics.totals["forfeited"] == 1

    def test_as_dict_round_trips_json(self):
        metrics = compute_metrics([episode(0, 43)], 50)
        payload = json.loads(json.dumps(metrics.as_dict()))
        assert payload["mean_win_rate"] == 0.86
        assert payload["win_counts"] == [43]


class TestDistribution:
    def test_normalize_empty(self):
        assert normalize_distribution({}) == {key: 0.0 for key in DISTRIBUTION_KEYS}

    def test_normalize_sums_to_one(self):
        counts = {"damaging_move": 6, "status_move": 1, "switch": 2, "item": 1}
        dist = normalize_distribution(counts)
        assert sum(dist.values()) == pytest.approx(1.0)
        assert dist["damaging_move"] == 0.6
        assert dist["run"] == 0.0

    def test_invalid_attempts_counted(self):
        records = [
            {"decision": {"category": "damaging_move"}, "invalid_attempts": []},
            {
                "decision": {"category": "run"},
                "invalid_attempts": [{"reason": "x"}, {"reason": "y"}],
            },
        ]
        dist = action_distribution(records)
        # Two decisions plus two rejected replies: four events total.
        assert dist["damaging_move"] == 0.25
        assert dist["run"] == 0.25
        assert dist["invalid"] == 0.5


class TestRunConfig:
    def test_unknown_policy(self):
        with pytest.raises(RunConfigError, match="policy"):
            RunConfig(policy_kind="alphazero")

    def test_unknown_transport(self):
        with pytest.raises(RunConfigError, match="transport"):
            RunConfig(transport="carrier-pigeon")

    def test_cassette_required_for_replay(self):
        with pytest.raises(RunConfigError, match="cassette"):
            RunConfig(transport="replay")

    def test_positive_counts_required(self):
        with pytest.raises(RunConfigError):
            RunConfig(battles_per_run=0)

    def test_dict_round_trip(self):
        config = RunConfig(
            seed=3,
            battles_per_run=5,
            repetitions=2,
            policy_kind="random",
            mask=AblationMask.from_slug("no-item"),
        )
        clone = RunConfig.from_dict(json.loads(json.dumps(config.as_dict())))
        assert clone.seed == 3
        assert clone.mask.slug == "no-item"
        assert clone.policy_kind == "random"
        assert clone.battles_per_run == 5

    def test_from_dict_rejects_unknown_fields(self):
        with pytest.raises(RunConfigError, match="mystery"):
            RunConfig.from_dict({"mystery": 1})


class TestRunDir:
    def test_deterministic_id(self, tmp_path):
        config = RunConfig(policy_kind="random", output_dir=str(tmp_path))
        run_id, run_dir = resolve_run_dir(config)
        assert run_id == "random-full-seed7"
        assert run_dir == tmp_path / "random-full-seed7"

    def test_clash_gets_suffix(self, tmp_path):
        config = RunConfig(policy_kind="random", output_dir=str(tmp_path))
        first, _ = resolve_run_dir(config)
        second, _ = resolve_run_dir(config)
        assert first == "random-full-seed7"
        assert second == "random-full-seed7-2"

    def test_explicit_run_id_wins(self, tmp_path):
        config = RunConfig(output_dir=str(tmp_path), run_id="my-run")
        run_id, _ = resolve_run_dir(config)
        assert run_id == "my-run"


class TestDropVolatile:
    def test_strips_nested_keys(self):
        record = {
            "timestamp": "now",
            "decision": {"latency_ms": 9, "wire": {"action": "run"}},
            "events": [{"created_at": "then", "kind": "x"}],
        }
        cleaned = drop_volatile(record)
        assert cleaned == {
            "decision": {"wire": {"action": "run"}},
            "events": [{"kind": "x"}],
        }
        assert CANONICAL_DROP_KEYS == {"timestamp", "latency_ms", "created_at"}


class TestGauntletRunner:
    def _runner(self, data, repo_root, **kwargs) -> GauntletRunner:
        checkpoint = load_checkpoint(
            data, repo_root / "data/checkpoints/mt_moon_default.json"
        )
        table = load_encounter_table(
            data, repo_root / "data/encounters/mt_moon.json"
        )
        template = PromptTemplate.from_file(default_prompt_path(repo_root))
        defaults = dict(seed=5, repetition=0, battles_per_run=2)
        defaults.update(kwargs)
        return GauntletRunner(
            data, checkpoint, table, template, AblationMask(), **defaults
        )

    def test_wiped_party_forfeits_everything(self, data, repo_root):
        fainted = make_monster(name="downed")
        fainted.current_hp = 0
        checkpoint = Checkpoint(name="wiped", party=[fainted], bag=Bag(potions=0))
        table = load_encounter_table(data, repo_root / "data/encounters/mt_moon.json")
        template = PromptTemplate.from_file(default_prompt_path(repo_root))
        runner = GauntletRunner(
            data, checkpoint, table, template, AblationMask(),
            seed=1, repetition=0, battles_per_run=3,
        )
        assert runner.finished
        assert runner.result.outcomes == ["forfeited"] * 3
        with pytest.raises(RuntimeError, match="finished"):
            runner.observation()

    def test_heuristic_plays_through(self, data, repo_root):
        runner = self._runner(data, repo_root)
        policy = HeuristicPolicy(data.ruleset)
        policy_rng = streams.policy_stream(5, 0)
        steps = 0
        last = None
        while not runner.finished:
            obs = runner.observation()
            decision = policy.decide(obs, policy_rng)
            last = runner.submit(decision)
            steps += 1
            assert steps < 500, "gauntlet did not terminate"
        assert last is not None and last.finished
        assert len(runner.result.outcomes) == 2
        assert set(runner.result.outcomes) <= {"win", "loss", "escaped", "forfeited"}
        assert runner.result.turns_total == steps

    def test_checkpoint_not_mutated(self, data, repo_root):
        checkpoint = load_checkpoint(
            data, repo_root / "data/checkpoints/mt_moon_default.json"
        )
        table = load_encounter_table(data, repo_root / "data/encounters/mt_moon.json")
        template = PromptTemplate.from_file(default_prompt_path(repo_root))
        runner = GauntletRunner(
            data, checkpoint, table, template, AblationMask(),
            seed=5, repetition=0, battles_per_run=1,
        )
        runner.state.active.take_damage(5)
        runner.bag.potions = 0
        assert checkpoint.party[0].current_hp == checkpoint.party[0].max_hp
        assert checkpoint.bag.potions == 5

    def test_encounters_keyed_by_seed_only(self, data, repo_root):
        # Same seed, fresh runner: identical opening enemy.
        first = self._runner(data, repo_root)
        second = self._runner(data, repo_root)
        assert first.state.enemy.as_dict() == second.state.enemy.as_dict()
        other = self._runner(data, repo_root, seed=6)
        schedule = [
            streams.encounter_stream(5, 0, b).random() for b in range(3)
        ]
        other_schedule = [
            streams.encounter_stream(6, 0, b).random() for b in range(3)
        ]
        assert schedule != other_schedule


def run_config(tmp_path: Path, **kwargs) -> RunConfig:
    defaults = dict(
        seed=11,
        battles_per_run=3,
        repetitions=2,
        policy_kind="random",
        output_dir=str(tmp_path),
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


class TestRepeatAndAggregate:
    def test_run_directory_contents(self, data, tmp_path):
        metrics, run_dir = repeat_and_aggregate(data, run_config(tmp_path))
        for name in ("turns.jsonl", "metrics.json", "config.json", "summary.csv"):
            assert (run_dir / name).is_file(), name
        payload = json.loads((run_dir / "metrics.json").read_text())
        assert payload["repetitions"] == 2
        assert payload["battles_per_run"] == 3
        assert payload["mean_win_rate"] == metrics.mean_win_rate
        assert payload["run_id"] == run_dir.name
        config_echo = json.loads((run_dir / "config.json").read_text())
        assert config_echo["policy_kind"] == "random"
        assert "api_key" not in config_echo["llm"]
        summary_lines = (run_dir / "summary.csv").read_text().splitlines()
        assert len(summary_lines) == 3  # header plus one row per repetition

    def test_turn_log_shape(self, data, tmp_path):
        _, run_dir = repeat_and_aggregate(data, run_config(tmp_path))
        records = read_turn_records(run_dir / "turns.jsonl")
        assert records
        first = records[0]
        assert first["repetition"] == 0
        assert first["battle"] == 1
        assert first["phase"] in ("turn", "forced_switch")
        assert first["decision"]["source"] == "random"
        assert first["decision"]["category"] in DISTRIBUTION_KEYS
        assert len(first["state_digest"]) == 16
        outcomes = [r["battle_outcome"] for r in records if r["battle_outcome"]]
        assert len(outcomes) == sum(
            1 for r in records if r["battle_outcome"] is not None
        )

    def test_deterministic_across_invocations(self, data, tmp_path):
        metrics_a, dir_a = repeat_and_aggregate(
            data, run_config(tmp_path / "a")
        )
        metrics_b, dir_b = repeat_and_aggregate(
            data, run_config(tmp_path / "b")
        )
        assert canonical_log(dir_a / "turns.jsonl") == canonical_log(
            dir_b / "turns.jsonl"
        )
        a = metrics_a.as_dict()
        b = metrics_b.as_dict()
        assert a == b

    def test_distribution_comes_from_log(self, data, tmp_path):
        metrics, run_dir = repeat_and_aggregate(data, run_config(tmp_path))
        records = read_turn_records(run_dir / "turns.jsonl")
        assert metrics.action_distribution == action_distribution(records)
        assert sum(metrics.action_distribution.values()) == pytest.approx(1.0)


@pytest.fixture(scope="module")
def sweep(data, tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("sweep")
    config = run_config(tmp_path, seed=4, battles_per_run=2, repetitions=2)
    return ablation_sweep(data, config) + (tmp_path,)


class TestAblationSweep:
    def test_runs_all_four_masks(self, sweep):
        results, sweep_dir, _ = sweep
        assert set(results) == {"full", "no-escape", "no-switch", "no-item"}
        for slug in results:
            assert (sweep_dir / slug / "metrics.json").is_file()
        assert (sweep_dir / "ablation_summary.csv").is_file()

    def test_masked_actions_never_appear(self, sweep):
        results, sweep_dir, _ = sweep
        forbidden = {"no-escape": "run", "no-switch": "switch", "no-item": "item"}
        for slug, category in forbidden.items():
            records = read_turn_records(sweep_dir / slug / "turns.jsonl")
            for record in records:
                if slug == "no-switch" and record["phase"] == "forced_switch":
                    continue  # forced replacements are exempt from the mask
                assert record["decision"]["category"] != category, slug

    def test_shared_opening_encounters(self, sweep):
        results, sweep_dir, _ = sweep
        openers: dict[str, list[str]] = {}
        for slug in results:
            records = read_turn_records(sweep_dir / slug / "turns.jsonl")
            openers[slug] = [
                r["state_digest"]
                for r in records
                if r["battle"] == 1 and r["turn"] == 1 and r["phase"] == "turn"
            ]
        baseline = openers["full"]
        assert baseline
        for slug, digests in openers.items():
            assert digests == baseline, slug

    def test_summary_lists_each_mask(self, sweep):
        _, sweep_dir, _ = sweep
        lines = (sweep_dir / "ablation_summary.csv").read_text().splitlines()
        assert lines[0].startswith("mask,mean_win_rate")
        assert {line.split(",")[0] for line in lines[1:]} == {
            "full", "no-escape", "no-switch", "no-item"
        }


class TestMemoryPilot:
    def test_pilot_is_deterministic(self, data, tmp_path):
        first = run_memory_pilot(data, tmp_path / "a.jsonl")
        second = run_memory_pilot(data, tmp_path / "b.jsonl")
        assert first.as_dict() == second.as_dict()

    def test_pilot_recalls_seeded_defeat(self, data, tmp_path):
        result = run_memory_pilot(data, tmp_path / "mem.jsonl")
        assert result.seeded_record_id == "pilot-defeat-0001"
        assert result.top_is_seeded
        assert result.recommendation == {"action": "run"}
        assert result.decision_wire == {"action": "run"}
        assert result.decision_source == "memory"
        assert any("Squirtle" in line for line in result.prompt_memory_block)

    def test_pilot_store_contains_record(self, data, tmp_path):
        store_path = tmp_path / "mem.jsonl"
        run_memory_pilot(data, store_path)
        lines = store_path.read_text().splitlines()
        assert len(lines) == 1
        payload = json.loads(lines[0])
        assert payload["id"] == "pilot-defeat-0001"
        assert payload["outcome"] == "lost"
        assert payload["created_at"] == "1996-02-27T00:00:00+00:00"
