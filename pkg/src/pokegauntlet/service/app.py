"""FastAPI application wrapping the harness.

Experiments (runs, ablations, the memory pilot) execute server-side in a
single request. Interactive battles run as sessions: create one, then
alternate observation fetches and action posts; invalid actions are
rejected with the reason and leave the session where it was.
"""

from __future__ import annotations

import tempfile
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException

from pokegauntlet import __version__
from pokegauntlet.agentio import (
    AblationMask,
    ActionRequest,
    InvalidActionError,
    PromptTemplate,
    validate_action,
)
from pokegauntlet.engine.model import ActionKind
from pokegauntlet.gamedata import DataError, GameData, load_game_data
from pokegauntlet.harness import (
    GauntletRunner,
    MemorySettings,
    RunConfig,
    RunConfigError,
    ablation_sweep,
    repeat_and_aggregate,
    resolve_run_paths,
    run_memory_pilot,
)
from pokegauntlet.llm import EndpointConfigError, LlmEndpointConfig, TransportUnavailable
from pokegauntlet.memory import MemoryStore, MemoryStoreError
from pokegauntlet.paths import RootNotFoundError, find_root
from pokegauntlet.policies import PolicyDecision
from pokegauntlet.scenario import load_checkpoint, load_encounter_table
from pokegauntlet.service import schemas


class Session:
    def __init__(self, runner: GauntletRunner):
        self.id = uuid.uuid4().hex[:12]
        self.runner = runner
        self.lock = threading.Lock()


def _run_config_from_request(request: schemas.RunRequest) -> RunConfig:
    llm = LlmEndpointConfig.from_env()
    if request.llm is not None:
        for field_name, value in request.llm.model_dump(exclude_none=True).items():
            setattr(llm, field_name, value)
    return RunConfig(
        seed=request.seed,
        battles_per_run=request.battles_per_run,
        repetitions=request.repetitions,
        policy_kind=request.policy,
        mask=AblationMask.from_slug(request.mask),
        checkpoint_path=request.checkpoint_path,
        encounter_path=request.encounter_path,
        prompt_path=request.prompt_path,
        output_dir=request.output_dir,
        run_id=request.run_id,
        transport=request.transport,
        cassette_path=request.cassette_path,
        llm=llm,
        memory=MemorySettings(**request.memory.model_dump()),
    )


def _observation_model(runner: GauntletRunner) -> schemas.ObservationModel:
    obs = runner.observation()
    return schemas.ObservationModel(
        battle_number=runner.battle_number,
        turn_number=obs.state.turn_number,
        forced_switch=obs.state.forced_switch_pending,
        location=obs.location,
        prompt=obs.prompt,
        menu=[
            schemas.MenuEntryModel(
                wire={"action": entry.kind.value}
                | ({"index": entry.index} if entry.index is not None else {}),
                label=entry.label,
            )
            for entry in obs.menu.entries
        ],
    )


def _session_summary(runner: GauntletRunner) -> schemas.SessionSummaryModel:
    return schemas.SessionSummaryModel(
        outcomes=list(runner.result.outcomes),
        wins=runner.result.wins,
        battles_per_run=runner.battles_per_run,
    )


def create_app(root: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="pokegauntlet", version=__version__)
    app.state.root = root
    app.state.data = None
    app.state.data_lock = threading.Lock()
    app.state.sessions = {}
    app.state.sessions_lock = threading.Lock()

    def get_data() -> GameData:
        with app.state.data_lock:
            if app.state.data is None:
                try:
                    app.state.data = load_game_data(app.state.root)
                except (DataError, RootNotFoundError) as exc:
                    raise HTTPException(status_code=400, detail=_detail(exc)) from exc
            return app.state.data

    def _detail(exc: Exception) -> dict:
        return {"type": type(exc).__name__, "message": str(exc)}

    def _map_errors(exc: Exception) -> HTTPException:
        if isinstance(
            exc, (DataError, RunConfigError, RootNotFoundError, MemoryStoreError, ValueError)
        ):
            return HTTPException(status_code=400, detail=_detail(exc))
        if isinstance(exc, (EndpointConfigError, TransportUnavailable)):
            return HTTPException(status_code=502, detail=_detail(exc))
        raise exc

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/data/validation")
    def validate_data(root: Optional[str] = None) -> schemas.ValidateResponse:
        try:
            root_path = find_root(root or app.state.root)
        except RootNotFoundError as exc:
            raise HTTPException(status_code=400, detail=_detail(exc)) from exc
        files = []
        ok = True

        def check(label: str, loader) -> None:
            nonlocal ok
            try:
                loader()
                files.append({"path": label, "ok": True, "error": None})
            except (DataError, RootNotFoundError, ValueError) as exc:
                ok = False
                files.append({"path": label, "ok": False, "error": str(exc)})

        data_holder: list[GameData] = []

        def load_core() -> None:
            data_holder.append(load_game_data(root_path))

        check("data (types, stages, moves, species)", load_core)
        if data_holder:
            data = data_holder[0]
            check(
                "data/encounters/mt_moon.json",
                lambda: load_encounter_table(
                    data, root_path / "data" / "encounters" / "mt_moon.json"
                ),
            )
            check(
                "data/checkpoints/mt_moon_default.json",
                lambda: load_checkpoint(
                    data, root_path / "data" / "checkpoints" / "mt_moon_default.json"
                ),
            )
            check(
                "prompts/battle_v1.txt",
                lambda: PromptTemplate.from_file(
                    root_path / "prompts" / "battle_v1.txt"
                ),
            )
        return schemas.ValidateResponse(ok=ok, root=str(root_path), files=files)

    @app.post("/runs")
    def create_run(request: schemas.RunRequest) -> schemas.RunResponse:
        data = get_data()
        try:
            config = _run_config_from_request(request)
            metrics, run_dir = repeat_and_aggregate(data, config)
        except Exception as exc:  # noqa: BLE001 - mapped or re-raised
            raise _map_errors(exc) from exc
        return schemas.RunResponse(
            run_id=run_dir.name,
            run_dir=str(run_dir),
            metrics=schemas.MetricsModel(**metrics.as_dict()),
        )

    @app.post("/ablations")
    def create_ablation(request: schemas.AblationRequest) -> schemas.AblationResponse:
        data = get_data()
        try:
            config = _run_config_from_request(request)
            results, sweep_dir = ablation_sweep(data, config)
        except Exception as exc:  # noqa: BLE001
            raise _map_errors(exc) from exc
        return schemas.AblationResponse(
            sweep_dir=str(sweep_dir),
            variants={
                slug: schemas.MetricsModel(**metrics.as_dict())
                for slug, metrics in results.items()
            },
        )

    @app.post("/pilot-memory")
    def pilot_memory(request: schemas.PilotRequest) -> schemas.PilotResponse:
        data = get_data()
        try:
            if request.store_path:
                store_path = Path(request.store_path)
                result = run_memory_pilot(data, store_path)
            else:
                with tempfile.TemporaryDirectory() as tmp:
                    store_path = Path(tmp) / "memory.jsonl"
                    result = run_memory_pilot(data, store_path)
        except Exception as exc:  # noqa: BLE001
            raise _map_errors(exc) from exc
        return schemas.PilotResponse(
            **result.as_dict(), store_path=str(store_path)
        )

    @app.post("/memory/compaction")
    def compact_memory(request: schemas.CompactRequest) -> schemas.CompactResponse:
        try:
            store = MemoryStore(request.store_path)
            removed = store.compact()
        except Exception as exc:  # noqa: BLE001
            raise _map_errors(exc) from exc
        return schemas.CompactResponse(
            store_path=request.store_path, records=len(store), removed=removed
        )

    @app.post("/sessions")
    def create_session(request: schemas.SessionCreateRequest) -> schemas.SessionState:
        data = get_data()
        try:
            config = RunConfig(
                seed=request.seed,
                battles_per_run=request.battles_per_run,
                policy_kind="human",
                mask=AblationMask.from_slug(request.mask),
                checkpoint_path=request.checkpoint_path,
                encounter_path=request.encounter_path,
                prompt_path=request.prompt_path,
            )
            checkpoint_path, encounter_path, prompt_path = resolve_run_paths(
                config, data
            )
            runner = GauntletRunner(
                data,
                load_checkpoint(data, checkpoint_path),
                load_encounter_table(data, encounter_path),
                PromptTemplate.from_file(prompt_path),
                config.mask,
                seed=request.seed,
                repetition=request.repetition,
                battles_per_run=request.battles_per_run,
            )
        except Exception as exc:  # noqa: BLE001
            raise _map_errors(exc) from exc
        session = Session(runner)
        with app.state.sessions_lock:
            app.state.sessions[session.id] = session
        return schemas.SessionState(
            session_id=session.id,
            finished=runner.finished,
            observation=None if runner.finished else _observation_model(runner),
            result=_session_summary(runner) if runner.finished else None,
        )

    def _get_session(session_id: str) -> Session:
        with app.state.sessions_lock:
            session = app.state.sessions.get(session_id)
        if session is None:
            raise HTTPException(
                status_code=404,
                detail={"type": "SessionNotFound", "message": session_id},
            )
        return session

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> schemas.SessionState:
        session = _get_session(session_id)
        with session.lock:
            runner = session.runner
            return schemas.SessionState(
                session_id=session.id,
                finished=runner.finished,
                observation=None if runner.finished else _observation_model(runner),
                result=_session_summary(runner) if runner.finished else None,
            )

    @app.post("/sessions/{session_id}/actions")
    def act(
        session_id: str, request: schemas.SessionActionRequest
    ) -> schemas.SessionStepResponse:
        session = _get_session(session_id)
        with session.lock:
            runner = session.runner
            if runner.finished:
                raise HTTPException(
                    status_code=409,
                    detail={"type": "SessionFinished", "message": session_id},
                )
            obs = runner.observation()
            try:
                kind = ActionKind(request.action.lower())
            except ValueError:
                return schemas.SessionStepResponse(
                    session_id=session.id,
                    accepted=False,
                    error=f"unknown action kind {request.action!r}",
                    observation=_observation_model(runner),
                )
            wire = ActionRequest(kind=kind, index=request.index)
            try:
                action = validate_action(wire, obs.menu)
            except InvalidActionError as exc:
                return schemas.SessionStepResponse(
                    session_id=session.id,
                    accepted=False,
                    error=str(exc),
                    observation=_observation_model(runner),
                )
            decision = PolicyDecision(action=action, request=wire, source="human")
            step = runner.submit(decision)
            return schemas.SessionStepResponse(
                session_id=session.id,
                accepted=True,
                lines=step.lines,
                battle_ended=step.battle_ended,
                battle_outcome=(
                    step.battle_outcome.value if step.battle_outcome else None
                ),
                finished=step.finished,
                observation=None if step.finished else _observation_model(runner),
                result=_session_summary(runner) if step.finished else None,
            )

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        with app.state.sessions_lock:
            existed = app.state.sessions.pop(session_id, None)
        if existed is None:
            raise HTTPException(
                status_code=404,
                detail={"type": "SessionNotFound", "message": session_id},
            )
        return {"deleted": session_id}

    return app
