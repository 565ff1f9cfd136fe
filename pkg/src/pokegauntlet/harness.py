"""Gauntlet runner, aggregation, ablations, and run logging.

A "run" is ``repetitions`` independent gauntlets of ``battles_per_run``
wild battles from the same checkpoint. Party HP, PP, potions, sleep, and
paralysis persist across battles within a repetition; a party wipe
forfeits the remaining battles of that repetition. Every decision is one
JSONL line in ``turns.jsonl``; ``metrics.json`` and ``summary.csv`` are
derived from those lines plus per-repetition counters.

Encounter randomness is keyed by (seed, repetition, battle) only, so
ablation variants and different policies face identical encounter
schedules.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from pokegauntlet import rng as streams
from pokegauntlet.agentio import (
    AblationMask,
    HistoryWindow,
    PromptTemplate,
    build_action_menu,
    serialize_state,
)
from pokegauntlet.engine.battle import enemy_policy, resolve_forced_switch, resolve_turn
from pokegauntlet.engine.events import BattleEvent, EventKind, render_event
from pokegauntlet.engine.mechanics import create_monster
from pokegauntlet.engine.model import (
    Action,
    ActionKind,
    Bag,
    BattleOutcome,
    BattleState,
    DvSpread,
)
from pokegauntlet.gamedata import GameData
from pokegauntlet.llm import (
    LiveTransport,
    LlmEndpointConfig,
    RecordTransport,
    ReplayTransport,
    Transport,
    canonical_json,
)
from pokegauntlet.memory import (
    BattleEntities,
    MemoryQuery,
    MemoryStore,
    format_snippets,
    memory_aware_rule,
)
from pokegauntlet.paths import (
    default_checkpoint_path,
    default_encounter_path,
    default_prompt_path,
)
from pokegauntlet.policies import (
    HeuristicPolicy,
    HumanPolicy,
    LlmPolicy,
    MemoryAwarePolicy,
    Observation,
    PolicyDecision,
    RandomPolicy,
)
from pokegauntlet.scenario import (
    Checkpoint,
    EncounterTable,
    load_checkpoint,
    load_encounter_table,
    sample_encounter,
    spawn_wild,
)

POLICY_KINDS = ("random", "heuristic", "memory", "llm", "human")
TRANSPORT_KINDS = ("live", "record", "replay")

DAMAGING_MOVE = "damaging_move"
STATUS_MOVE = "status_move"
SWITCH = "switch"
ITEM = "item"
RUN = "run"
INVALID = "invalid"
DISTRIBUTION_KEYS = (DAMAGING_MOVE, STATUS_MOVE, SWITCH, ITEM, RUN, INVALID)

# Outcome label for battles never fought because the party wiped earlier.
FORFEITED = "forfeited"

# Volatile fields stripped before any log comparison.
CANONICAL_DROP_KEYS = frozenset({"timestamp", "latency_ms", "created_at"})


class RunConfigError(ValueError):
    """Bad run configuration (unknown policy, missing paths, ...)."""


@dataclass
class MemorySettings:
    enabled: bool = False
    store_path: Optional[str] = None
    record_losses: bool = False
    k: int = 3

    def as_dict(self) -> dict[str, object]:
        return {
            "enabled": self.enabled,
            "store_path": self.store_path,
            "record_losses": self.record_losses,
            "k": self.k,
        }


@dataclass
class RunConfig:
    seed: int = 7
    battles_per_run: int = 50
    repetitions: int = 10
    policy_kind: str = "heuristic"
    mask: AblationMask = field(default_factory=AblationMask)
    checkpoint_path: Optional[str] = None
    encounter_path: Optional[str] = None
    prompt_path: Optional[str] = None
    output_dir: str = "runs"
    run_id: Optional[str] = None
    transport: str = "live"
    cassette_path: Optional[str] = None
    llm: LlmEndpointConfig = field(default_factory=LlmEndpointConfig.from_env)
    memory: MemorySettings = field(default_factory=MemorySettings)

    def __post_init__(self) -> None:
        if self.policy_kind not in POLICY_KINDS:
            raise RunConfigError(
                f"unknown policy {self.policy_kind!r}; expected one of {POLICY_KINDS}"
            )
        if self.transport not in TRANSPORT_KINDS:
            raise RunConfigError(
                f"unknown transport {self.transport!r}; expected one of {TRANSPORT_KINDS}"
            )
        if self.battles_per_run < 1 or self.repetitions < 1:
            raise RunConfigError("battles_per_run and repetitions must be >= 1")
        if self.transport in ("record", "replay") and not self.cassette_path:
            raise RunConfigError(f"transport {self.transport!r} needs a cassette path")

    def as_dict(self) -> dict[str, object]:
        return {
            "seed": self.seed,
            "battles_per_run": self.battles_per_run,
            "repetitions": self.repetitions,
            "policy_kind": self.policy_kind,
            "mask": self.mask.slug,
            "checkpoint_path": self.checkpoint_path,
            "encounter_path": self.encounter_path,
            "prompt_path": self.prompt_path,
            "output_dir": self.output_dir,
            "run_id": self.run_id,
            "transport": self.transport,
            "cassette_path": self.cassette_path,
            "llm": self.llm.public_dict(),
            "memory": self.memory.as_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        payload = dict(payload)
        mask_raw = payload.pop("mask", "full")
        mask = (
            AblationMask.from_slug(mask_raw) if isinstance(mask_raw, str) else mask_raw
        )
        llm_raw = payload.pop("llm", None)
        llm = LlmEndpointConfig.from_env()
        if isinstance(llm_raw, dict):
            for key in ("base_url", "model_name", "api_key", "temperature",
                        "timeout_ms", "max_retries", "max_in_flight"):
                if key in llm_raw:
                    setattr(llm, key, llm_raw[key])
        memory_raw = payload.pop("memory", None)
        memory = MemorySettings(**memory_raw) if isinstance(memory_raw, dict) else MemorySettings()
        known = {f for f in cls.__dataclass_fields__ if f not in ("mask", "llm", "memory")}
        unknown = set(payload) - known
        if unknown:
            raise RunConfigError(f"unknown config fields: {sorted(unknown)}")
        payload.pop("api_key_present", None)
        return cls(mask=mask, llm=llm, memory=memory, **payload)


@dataclass
class EpisodeResult:
    """One repetition's raw outcomes and counters."""

    repetition: int
    outcomes: list[str] = field(default_factory=list)
    turns_total: int = 0
    decision_counts: dict[str, int] = field(
        default_factory=lambda: {key: 0 for key in DISTRIBUTION_KEYS}
    )
    potions_used: int = 0
    strategic_switches: int = 0
    forced_switches: int = 0
    escape_attempts: int = 0
    escape_successes: int = 0
    fallback_decisions: int = 0

    @property
    def wins(self) -> int:
        return sum(1 for outcome in self.outcomes if outcome == "win")

    def win_rate(self, battles_per_run: int) -> float:
        return self.wins / battles_per_run

    def as_dict(self, battles_per_run: int) -> dict[str, object]:
        return {
            "repetition": self.repetition,
            "wins": self.wins,
            "win_rate": self.win_rate(battles_per_run),
            "outcomes": dict(
                (label, self.outcomes.count(label))
                for label in ("win", "loss", "escaped", FORFEITED)
            ),
            "turns_total": self.turns_total,
            "decision_counts": dict(self.decision_counts),
            "potions_used": self.potions_used,
            "strategic_switches": self.strategic_switches,
            "forced_switches": self.forced_switches,
            "escape_attempts": self.escape_attempts,
            "escape_successes": self.escape_successes,
            "fallback_decisions": self.fallback_decisions,
        }


@dataclass
class AggregateMetrics:
    battles_per_run: int
    repetitions: int
    win_counts: list[int]
    per_repetition: list[dict]
    action_distribution: dict[str, float]
    totals: dict[str, int]

    @property
    def total_wins(self) -> int:
        return sum(self.win_counts)

    @property
    def mean_win_rate(self) -> float:
        # One division over the pooled battles keeps this exact for the
        # literal comparisons in the tests.
        return self.total_wins / (self.repetitions * self.battles_per_run)

    @property
    def sem_win_rate(self) -> float:
        if self.repetitions < 2:
            return 0.0
        rates = [count / self.battles_per_run for count in self.win_counts]
        return statistics.stdev(rates) / (self.repetitions ** 0.5)

    def as_dict(self) -> dict[str, object]:
        return {
            "battles_per_run": self.battles_per_run,
            "repetitions": self.repetitions,
            "win_counts": list(self.win_counts),
            "total_wins": self.total_wins,
            "mean_win_rate": self.mean_win_rate,
            "sem_win_rate": self.sem_win_rate,
            "action_distribution": dict(self.action_distribution),
            "totals": dict(self.totals),
            "per_repetition": list(self.per_repetition),
        }


def compute_metrics(
    episodes: Sequence[EpisodeResult],
    battles_per_run: int,
    action_dist: Optional[dict[str, float]] = None,
) -> AggregateMetrics:
    totals = {
        "battles": battles_per_run * len(episodes),
        "wins": sum(e.wins for e in episodes),
        "losses": sum(e.outcomes.count("loss") for e in episodes),
        "escaped": sum(e.outcomes.count("escaped") for e in episodes),
        "forfeited": sum(e.outcomes.count(FORFEITED) for e in episodes),
        "turns": sum(e.turns_total for e in episodes),
        "potions_used": sum(e.potions_used for e in episodes),
        "strategic_switches": sum(e.strategic_switches for e in episodes),
        "forced_switches": sum(e.forced_switches for e in episodes),
        "escape_attempts": sum(e.escape_attempts for e in episodes),
        "escape_successes": sum(e.escape_successes for e in episodes),
        "invalid_replies": sum(e.decision_counts[INVALID] for e in episodes),
        "fallback_decisions": sum(e.fallback_decisions for e in episodes),
    }
    if action_dist is None:
        pooled = {key: 0 for key in DISTRIBUTION_KEYS}
        for episode in episodes:
            for key in DISTRIBUTION_KEYS:
                pooled[key] += episode.decision_counts[key]
        action_dist = normalize_distribution(pooled)
    return AggregateMetrics(
        battles_per_run=battles_per_run,
        repetitions=len(episodes),
        win_counts=[e.wins for e in episodes],
        per_repetition=[e.as_dict(battles_per_run) for e in episodes],
        action_distribution=action_dist,
        totals=totals,
    )


def normalize_distribution(counts: dict[str, int]) -> dict[str, float]:
    total = sum(counts.get(key, 0) for key in DISTRIBUTION_KEYS)
    if total == 0:
        return {key: 0.0 for key in DISTRIBUTION_KEYS}
    return {key: counts.get(key, 0) / total for key in DISTRIBUTION_KEYS}


def action_distribution(records: Iterable[dict]) -> dict[str, float]:
    """Share of each action family among logged decision events.

    Every decision line counts once under its category, and every
    rejected model reply counts once under ``invalid``; the values sum
    to 1 whenever any events exist.
    """
    counts = {key: 0 for key in DISTRIBUTION_KEYS}
    for record in records:
        decision = record.get("decision") or {}
        category = decision.get("category")
        if category in counts:
            counts[category] += 1
        counts[INVALID] += len(record.get("invalid_attempts") or ())
    return normalize_distribution(counts)


def state_digest(state: BattleState) -> str:
    return hashlib.sha256(
        canonical_json(state.as_dict()).encode("utf-8")
    ).hexdigest()[:16]


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def _decision_category(state: BattleState, action: Action) -> str:
    if action.kind is ActionKind.MOVE:
        if action.move_slot is None:
            return DAMAGING_MOVE  # Struggle
        move = state.active.moves[action.move_slot].move
        return DAMAGING_MOVE if move.is_damaging else STATUS_MOVE
    if action.kind is ActionKind.SWITCH:
        return SWITCH
    if action.kind is ActionKind.ITEM:
        return ITEM
    return RUN


@dataclass
class StepOutcome:
    events: list[BattleEvent]
    lines: list[str]
    category: str
    battle_ended: bool
    battle_outcome: Optional[BattleOutcome]
    finished: bool


class GauntletRunner:
    """Drives one repetition battle by battle, decision by decision.

    The runner owns the battle state and RNG streams; callers alternate
    ``observation()`` and ``submit(decision)`` until ``finished``. The
    service's interactive sessions use exactly this surface.
    """

    def __init__(
        self,
        data: GameData,
        checkpoint: Checkpoint,
        table: EncounterTable,
        template: PromptTemplate,
        mask: AblationMask,
        *,
        seed: int,
        repetition: int,
        battles_per_run: int,
        memory_store: Optional[MemoryStore] = None,
        memory_settings: Optional[MemorySettings] = None,
    ):
        self.data = data
        self.table = table
        self.template = template
        self.mask = mask
        self.seed = seed
        self.repetition = repetition
        self.battles_per_run = battles_per_run
        self.memory_store = memory_store
        self.memory_settings = memory_settings or MemorySettings()

        self.party = copy.deepcopy(checkpoint.party)
        self.bag = copy.deepcopy(checkpoint.bag)
        self.history = HistoryWindow()
        self.result = EpisodeResult(repetition=repetition)
        self.battle_index = 0  # 0-based; battle_number is this + 1
        self.state: Optional[BattleState] = None
        self._battle_rng = None
        self.finished = False
        self._start_battle()

    # -- battle lifecycle -------------------------------------------------

    def _first_standing(self) -> Optional[int]:
        for i, member in enumerate(self.party):
            if not member.fainted:
                return i
        return None

    def _start_battle(self) -> None:
        active_index = self._first_standing()
        if active_index is None:
            self._forfeit_rest()
            return
        encounter_rng = streams.encounter_stream(
            self.seed, self.repetition, self.battle_index
        )
        species, level = sample_encounter(self.table, encounter_rng)
        enemy = spawn_wild(self.data, species, level, encounter_rng)
        self._battle_rng = streams.battle_stream(
            self.seed, self.repetition, self.battle_index
        )
        self.history.clear()
        self.party[active_index].enter_battle()
        self.state = BattleState(
            party=self.party,
            active_index=active_index,
            enemy=enemy,
            bag=self.bag,
        )

    def _forfeit_rest(self) -> None:
        remaining = self.battles_per_run - self.battle_index
        self.result.outcomes.extend([FORFEITED] * remaining)
        self.state = None
        self.finished = True

    @property
    def battle_number(self) -> int:
        return self.battle_index + 1

    # -- decision surface --------------------------------------------------

    def _memory_results(self):
        if not (self.memory_store and self.memory_settings.enabled):
            return ()
        active = self.state.active
        query = MemoryQuery(
            entities=BattleEntities(
                ally_species=active.species.name,
                ally_level=active.level,
                enemy_species=self.state.enemy.species.name,
                enemy_level=self.state.enemy.level,
                location=self.table.location,
            ),
            limit=self.memory_settings.k,
        )
        return tuple(self.memory_store.retrieve(query))

    def observation(self) -> Observation:
        if self.finished or self.state is None:
            raise RuntimeError("gauntlet already finished")
        menu = build_action_menu(self.state, self.mask)
        memory_results = self._memory_results()
        prompt = serialize_state(
            self.state,
            self.history,
            format_snippets(memory_results),
            self.mask,
            self.template,
            location=self.table.location,
            battle_number=self.battle_number,
            menu=menu,
        )
        return Observation(
            state=self.state,
            menu=menu,
            mask=self.mask,
            prompt=prompt,
            system_text=self.template.system_text,
            location=self.table.location,
            battle_number=self.battle_number,
            memory_results=memory_results,
        )

    def _tally_events(self, events: Sequence[BattleEvent]) -> None:
        for event in events:
            if event.kind is EventKind.ITEM_USED:
                self.result.potions_used += 1
            elif event.kind is EventKind.SWITCHED:
                if event.forced:
                    self.result.forced_switches += 1
                else:
                    self.result.strategic_switches += 1
            elif event.kind is EventKind.ESCAPE_ATTEMPTED:
                self.result.escape_attempts += 1
                if event.success:
                    self.result.escape_successes += 1

    def _record_loss_memory(self) -> None:
        if not (
            self.memory_store
            and self.memory_settings.enabled
            and self.memory_settings.record_losses
        ):
            return
        fallen = self.state.active
        enemy = self.state.enemy
        self.memory_store.insert(
            text=(
                f"Level {fallen.level} {fallen.name} was defeated by a"
                f" Level {enemy.level} {enemy.name} in {self.table.location}."
            ),
            outcome="lost",
            entities=BattleEntities(
                ally_species=fallen.species.name,
                ally_level=fallen.level,
                enemy_species=enemy.species.name,
                enemy_level=enemy.level,
                location=self.table.location,
            ),
        )

    def submit(self, decision: PolicyDecision) -> StepOutcome:
        if self.finished or self.state is None:
            raise RuntimeError("gauntlet already finished")
        state = self.state
        action = decision.action
        category = _decision_category(state, action)

        if state.forced_switch_pending:
            if action.kind is not ActionKind.SWITCH:
                raise ValueError("a forced switch requires a switch action")
            events = resolve_forced_switch(state, action.party_index)
        else:
            enemy_action = enemy_policy(state, self._battle_rng)
            events = resolve_turn(
                self.data.ruleset, state, action, enemy_action, self._battle_rng
            )

        self.result.turns_total += 1
        self.result.decision_counts[category] += 1
        self.result.decision_counts[INVALID] += len(decision.invalid_attempts)
        if decision.source == "fallback":
            self.result.fallback_decisions += 1
        self._tally_events(events)
        self.history.record(events)

        battle_ended = state.is_over
        outcome = state.outcome if battle_ended else None
        if battle_ended:
            self.result.outcomes.append(state.outcome.value)
            if state.outcome is BattleOutcome.LOSS:
                self._record_loss_memory()
            self.battle_index += 1
            if state.outcome is BattleOutcome.LOSS or (
                self.battle_index >= self.battles_per_run
            ):
                self.state = None
                self.finished = True
                if self.battle_index < self.battles_per_run:
                    self._forfeit_rest()
            else:
                self._start_battle()
        lines = [line for line in (render_event(e) for e in events) if line]
        return StepOutcome(
            events=list(events),
            lines=lines,
            category=category,
            battle_ended=battle_ended,
            battle_outcome=outcome,
            finished=self.finished,
        )


class TurnLogWriter:
    """Appends one JSON line per decision to ``turns.jsonl``."""

    def __init__(self, path: Path):
        self.path = path
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8")

    def write(self, record: dict) -> None:
        self._handle.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "TurnLogWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def _turn_record(
    runner: GauntletRunner,
    obs: Observation,
    decision: PolicyDecision,
    step: StepOutcome,
    pre_digest: str,
    battle_number: int,
    turn_number: int,
    phase: str,
) -> dict:
    return {
        "repetition": runner.repetition,
        "battle": battle_number,
        "turn": turn_number,
        "phase": phase,
        "state_digest": pre_digest,
        "prompt_sha256": prompt_digest(obs.prompt),
        "decision": {
            "category": step.category,
            "wire": decision.request.as_wire(),
            "source": decision.source,
            "retries_used": decision.retries_used,
            "latency_ms": decision.latency_ms,
        },
        "invalid_attempts": [a.as_dict() for a in decision.invalid_attempts],
        "events": [e.as_dict() for e in step.events],
        "battle_outcome": step.battle_outcome.value if step.battle_outcome else None,
    }


def build_policy(
    config: RunConfig,
    data: GameData,
    transport: Optional[Transport],
    *,
    input_fn=None,
    output_fn=None,
):
    if config.policy_kind == "random":
        return RandomPolicy()
    if config.policy_kind == "heuristic":
        return HeuristicPolicy(data.ruleset)
    if config.policy_kind == "memory":
        return MemoryAwarePolicy(data.ruleset)
    if config.policy_kind == "human":
        kwargs = {}
        if input_fn is not None:
            kwargs["input_fn"] = input_fn
        if output_fn is not None:
            kwargs["output_fn"] = output_fn
        return HumanPolicy(**kwargs)
    if transport is None:
        raise RunConfigError("llm policy needs a transport")
    return LlmPolicy(config.llm, transport)


def build_transport(config: RunConfig) -> Optional[Transport]:
    if config.policy_kind != "llm":
        return None
    if config.transport == "replay":
        return ReplayTransport(config.cassette_path)
    live = LiveTransport(config.llm)
    if config.transport == "record":
        return RecordTransport(live, config.cassette_path)
    return live


def resolve_run_paths(config: RunConfig, data: GameData) -> tuple[Path, Path, Path]:
    checkpoint = (
        Path(config.checkpoint_path)
        if config.checkpoint_path
        else default_checkpoint_path(data.root)
    )
    encounters = (
        Path(config.encounter_path)
        if config.encounter_path
        else default_encounter_path(data.root)
    )
    prompt = (
        Path(config.prompt_path)
        if config.prompt_path
        else default_prompt_path(data.root)
    )
    return checkpoint, encounters, prompt


_SLUG_RE = re.compile(r"[^a-z0-9-]+")


def _slugify(text: str) -> str:
    return _SLUG_RE.sub("-", text.lower()).strip("-") or "run"


def resolve_run_dir(config: RunConfig) -> tuple[str, Path]:
    """Deterministic run id plus a fresh directory (suffixes on clash)."""
    base = config.run_id or _slugify(
        f"{config.policy_kind}-{config.mask.slug}-seed{config.seed}"
    )
    root = Path(config.output_dir)
    candidate = base
    counter = 2
    while (root / candidate).exists():
        candidate = f"{base}-{counter}"
        counter += 1
    run_dir = root / candidate
    run_dir.mkdir(parents=True, exist_ok=True)
    return candidate, run_dir


def run_gauntlet(
    data: GameData,
    config: RunConfig,
    policy,
    repetition: int,
    checkpoint: Checkpoint,
    table: EncounterTable,
    template: PromptTemplate,
    log_writer: Optional[TurnLogWriter] = None,
    memory_store: Optional[MemoryStore] = None,
) -> EpisodeResult:
    """Play one full repetition with the given policy; returns its result."""
    runner = GauntletRunner(
        data,
        checkpoint,
        table,
        template,
        config.mask,
        seed=config.seed,
        repetition=repetition,
        battles_per_run=config.battles_per_run,
        memory_store=memory_store,
        memory_settings=config.memory,
    )
    policy_rng = streams.policy_stream(config.seed, repetition)
    while not runner.finished:
        obs = runner.observation()
        battle_number = runner.battle_number
        turn_number = obs.state.turn_number
        phase = "forced_switch" if obs.state.forced_switch_pending else "turn"
        pre_digest = state_digest(obs.state)
        decision = policy.decide(obs, policy_rng)
        step = runner.submit(decision)
        if log_writer is not None:
            log_writer.write(
                _turn_record(
                    runner, obs, decision, step, pre_digest,
                    battle_number, turn_number, phase,
                )
            )
    return runner.result


def read_turn_records(path: Path) -> list[dict]:
    records = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(json.loads(line))
    return records


def drop_volatile(value, keys: frozenset[str] = CANONICAL_DROP_KEYS):
    """Recursively remove timing fields before comparing logs."""
    if isinstance(value, dict):
        return {
            k: drop_volatile(v, keys) for k, v in value.items() if k not in keys
        }
    if isinstance(value, list):
        return [drop_volatile(v, keys) for v in value]
    return value


def canonical_log(path: Path) -> list[dict]:
    return [drop_volatile(record) for record in read_turn_records(path)]


def repeat_and_aggregate(
    data: GameData, config: RunConfig
) -> tuple[AggregateMetrics, Path]:
    """Run the whole experiment and write the run directory."""
    checkpoint_path, encounter_path, prompt_path = resolve_run_paths(config, data)
    checkpoint = load_checkpoint(data, checkpoint_path)
    table = load_encounter_table(data, encounter_path)
    template = PromptTemplate.from_file(prompt_path)
    run_id, run_dir = resolve_run_dir(config)

    transport = build_transport(config)
    policy = build_policy(config, data, transport)
    memory_store = None
    if config.memory.enabled:
        store_path = config.memory.store_path or str(run_dir / "memory.jsonl")
        memory_store = MemoryStore(store_path)

    episodes: list[EpisodeResult] = []
    try:
        with TurnLogWriter(run_dir / "turns.jsonl") as log_writer:
            for repetition in range(config.repetitions):
                episodes.append(
                    run_gauntlet(
                        data,
                        config,
                        policy,
                        repetition,
                        checkpoint,
                        table,
                        template,
                        log_writer,
                        memory_store,
                    )
                )
    finally:
        if transport is not None:
            transport.close()

    records = read_turn_records(run_dir / "turns.jsonl")
    metrics = compute_metrics(
        episodes, config.battles_per_run, action_distribution(records)
    )
    write_run_outputs(run_dir, run_id, config, metrics)
    return metrics, run_dir


def write_run_outputs(
    run_dir: Path, run_id: str, config: RunConfig, metrics: AggregateMetrics
) -> None:
    metrics_payload = {"run_id": run_id, **metrics.as_dict()}
    (run_dir / "metrics.json").write_text(
        json.dumps(metrics_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (run_dir / "config.json").write_text(
        json.dumps(config.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with (run_dir / "summary.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "repetition", "wins", "losses", "escaped", "forfeited",
                "win_rate", "turns_total", "potions_used", "strategic_switches",
                "forced_switches", "escape_attempts", "escape_successes",
                "invalid_replies", "fallback_decisions",
            ]
        )
        for row in metrics.per_repetition:
            outcomes = row["outcomes"]
            writer.writerow(
                [
                    row["repetition"], row["wins"], outcomes["loss"],
                    outcomes["escaped"], outcomes[FORFEITED],
                    f"{row['win_rate']:.4f}", row["turns_total"],
                    row["potions_used"], row["strategic_switches"],
                    row["forced_switches"], row["escape_attempts"],
                    row["escape_successes"],
                    row["decision_counts"][INVALID], row["fallback_decisions"],
                ]
            )


def ablation_sweep(
    data: GameData, base_config: RunConfig
) -> tuple[dict[str, AggregateMetrics], Path]:
    """Run the four masks with identical seeds and encounter schedules."""
    sweep_id, sweep_dir = resolve_run_dir(
        RunConfig(
            **{
                **_config_kwargs(base_config),
                "run_id": base_config.run_id
                or _slugify(f"ablate-{base_config.policy_kind}-seed{base_config.seed}"),
            }
        )
    )
    results: dict[str, AggregateMetrics] = {}
    for slug in AblationMask.VARIANTS:
        variant = RunConfig(
            **{
                **_config_kwargs(base_config),
                "mask": AblationMask.from_slug(slug),
                "output_dir": str(sweep_dir),
                "run_id": slug,
            }
        )
        metrics, _ = repeat_and_aggregate(data, variant)
        results[slug] = metrics
    _write_ablation_summary(sweep_dir, results)
    return results, sweep_dir


def _config_kwargs(config: RunConfig) -> dict:
    return {
        "seed": config.seed,
        "battles_per_run": config.battles_per_run,
        "repetitions": config.repetitions,
        "policy_kind": config.policy_kind,
        "mask": config.mask,
        "checkpoint_path": config.checkpoint_path,
        "encounter_path": config.encounter_path,
        "prompt_path": config.prompt_path,
        "output_dir": config.output_dir,
        "run_id": config.run_id,
        "transport": config.transport,
        "cassette_path": config.cassette_path,
        "llm": config.llm,
        "memory": config.memory,
    }


def _write_ablation_summary(
    sweep_dir: Path, results: dict[str, AggregateMetrics]
) -> None:
    with (sweep_dir / "ablation_summary.csv").open(
        "w", newline="", encoding="utf-8"
    ) as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "mask", "mean_win_rate", "sem_win_rate", "total_wins",
                "strategic_switches", "forced_switches", "potions_used",
                "escape_attempts",
            ]
        )
        for slug, metrics in results.items():
            writer.writerow(
                [
                    slug,
                    f"{metrics.mean_win_rate:.4f}",
                    f"{metrics.sem_win_rate:.4f}",
                    metrics.total_wins,
                    metrics.totals["strategic_switches"],
                    metrics.totals["forced_switches"],
                    metrics.totals["potions_used"],
                    metrics.totals["escape_attempts"],
                ]
            )


# -- memory pilot -----------------------------------------------------------

PILOT_SEED_TEXT = "Level 5 Squirtle was defeated by a Level 8 Pikachu in Viridian Forest."
PILOT_LOCATION = "Viridian Forest"


@dataclass
class PilotResult:
    seeded_record_id: str
    retrieved: list[dict]
    top_is_seeded: bool
    recommendation: Optional[dict]
    decision_wire: dict
    decision_source: str
    prompt_memory_block: list[str]

    def as_dict(self) -> dict[str, object]:
        return {
            "seeded_record_id": self.seeded_record_id,
            "retrieved": self.retrieved,
            "top_is_seeded": self.top_is_seeded,
            "recommendation": self.recommendation,
            "decision_wire": self.decision_wire,
            "decision_source": self.decision_source,
            "prompt_memory_block": self.prompt_memory_block,
        }


def run_memory_pilot(
    data: GameData, store_path: Path | str, *, k: int = 3
) -> PilotResult:
    """Seed one defeat memory, then face the same matchup a level up.

    Builds the follow-up encounter (level 6 against level 9 at the same
    location), retrieves memories for it, and lets the memory-aware
    policy decide. Deterministic end to end: fixed record id and
    timestamp, no battle RNG consumed before the decision.
    """
    store = MemoryStore(store_path)
    seeded = store.insert(
        text=PILOT_SEED_TEXT,
        outcome="lost",
        entities=BattleEntities(
            ally_species="squirtle",
            ally_level=5,
            enemy_species="pikachu",
            enemy_level=8,
            location=PILOT_LOCATION,
        ),
        record_id="pilot-defeat-0001",
        created_at="1996-02-27T00:00:00+00:00",
    )

    dvs = DvSpread()
    party = [create_monster(data.species_named("squirtle"), 6, dvs)]
    enemy = create_monster(data.species_named("pikachu"), 9, dvs)
    state = BattleState(party=party, active_index=0, enemy=enemy, bag=Bag(potions=0))

    mask = AblationMask()
    menu = build_action_menu(state, mask)
    query = MemoryQuery(
        entities=BattleEntities(
            ally_species="squirtle",
            ally_level=6,
            enemy_species="pikachu",
            enemy_level=9,
            location=PILOT_LOCATION,
        ),
        limit=k,
    )
    retrieved = store.retrieve(query)
    recommendation = memory_aware_rule(state, retrieved, menu)

    template = PromptTemplate.from_file(default_prompt_path(data.root))
    snippets = format_snippets(retrieved)
    prompt = serialize_state(
        state,
        HistoryWindow(),
        snippets,
        mask,
        template,
        location=PILOT_LOCATION,
        battle_number=1,
        menu=menu,
    )
    obs = Observation(
        state=state,
        menu=menu,
        mask=mask,
        prompt=prompt,
        system_text=template.system_text,
        location=PILOT_LOCATION,
        battle_number=1,
        memory_results=tuple(retrieved),
    )
    policy = MemoryAwarePolicy(data.ruleset)
    decision = policy.decide(obs, streams.stream("pilot"))

    recommendation_wire = None
    if recommendation is not None:
        for entry in menu.entries:
            if entry.action == recommendation:
                recommendation_wire = {"action": entry.kind.value}
                if entry.index is not None:
                    recommendation_wire["index"] = entry.index
    return PilotResult(
        seeded_record_id=seeded.id,
        retrieved=[
            {"id": record.id, "text": record.text, "outcome": record.outcome,
             "score": score}
            for record, score in retrieved
        ],
        top_is_seeded=bool(retrieved) and retrieved[0][0].id == seeded.id,
        recommendation=recommendation_wire,
        decision_wire=decision.request.as_wire(),
        decision_source=decision.source,
        prompt_memory_block=snippets,
    )
