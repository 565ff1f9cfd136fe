"""Command line interface; a thin client over the HTTP service.

Exit codes: 0 success, 2 usage errors (click), 3 data or configuration
problems, 4 endpoint/transport problems, 5 interactive session aborted.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click

from pokegauntlet import __version__
from pokegauntlet.service.client import ServiceClient, ServiceError

EXIT_DATA_ERROR = 3
EXIT_ENDPOINT_ERROR = 4
EXIT_INTERACTIVE_ABORT = 5

MASK_CHOICES = ("full", "no-switch", "no-item", "no-escape")
POLICY_CHOICES = ("random", "heuristic", "memory", "llm")


def _exit_for(error: ServiceError) -> int:
    if error.status_code == 502:
        return EXIT_ENDPOINT_ERROR
    return EXIT_DATA_ERROR


def _fail(error: ServiceError) -> None:
    click.echo(f"error: {error}", err=True)
    sys.exit(_exit_for(error))


@click.group()
@click.version_option(version=__version__, prog_name="pokegauntlet")
@click.option(
    "--server",
    default=None,
    metavar="URL",
    help="Talk to a running service instead of executing in-process.",
)
@click.option(
    "--root",
    default=None,
    metavar="DIR",
    help="Repository root holding data/ and prompts/ (in-process mode).",
)
@click.pass_context
def main(ctx: click.Context, server: Optional[str], root: Optional[str]) -> None:
    """Battle gauntlet runner and evaluation harness."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server
    ctx.obj["root"] = root


def _client(ctx: click.Context) -> ServiceClient:
    return ServiceClient(server_url=ctx.obj.get("server"), root=ctx.obj.get("root"))


LLM_CONFIG_KEYS = frozenset(
    ("base_url", "model_name", "api_key", "temperature",
     "timeout_ms", "max_retries", "max_in_flight")
)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: cannot read config {path}: {exc}", err=True)
        sys.exit(EXIT_DATA_ERROR)
    if not isinstance(payload, dict):
        click.echo(f"error: config {path} must hold a JSON object", err=True)
        sys.exit(EXIT_DATA_ERROR)
    # a previous run's config.json echoes extras like api_key_present
    if isinstance(payload.get("llm"), dict):
        payload["llm"] = {
            key: value
            for key, value in payload["llm"].items()
            if key in LLM_CONFIG_KEYS
        }
    return payload


def _run_payload(config_file: Optional[str], **flags) -> dict:
    payload = _load_config_file(config_file)
    # a previous run's config.json names the policy differently
    if "policy_kind" in payload:
        payload.setdefault("policy", payload.pop("policy_kind"))
    for key, value in flags.items():
        if value is not None:
            payload[key] = value
    return payload


run_options = [
    click.option("--seed", type=int, default=None, help="Master seed (default 7)."),
    click.option("--battles", "battles_per_run", type=int, default=None,
                 help="Battles per repetition (default 50)."),
    click.option("--repetitions", type=int, default=None,
                 help="Independent repetitions (default 10)."),
    click.option("--policy", type=click.Choice(POLICY_CHOICES), default=None,
                 help="Decision policy (default heuristic)."),
    click.option("--mask", type=click.Choice(MASK_CHOICES), default=None,
                 help="Ablation mask (default full)."),
    click.option("--checkpoint", "checkpoint_path", default=None,
                 help="Checkpoint JSON path."),
    click.option("--encounters", "encounter_path", default=None,
                 help="Encounter table JSON path."),
    click.option("--prompt", "prompt_path", default=None,
                 help="Prompt template path."),
    click.option("--output-dir", default=None, help="Run output root (default runs/)."),
    click.option("--run-id", default=None, help="Run directory name override."),
    click.option("--record", "record_cassette", default=None, metavar="CASSETTE",
                 help="Record LLM traffic to this cassette (llm policy)."),
    click.option("--replay", "replay_cassette", default=None, metavar="CASSETTE",
                 help="Replay LLM traffic from this cassette (llm policy)."),
    click.option("--memory-store", default=None, metavar="PATH",
                 help="Enable memory with this JSONL store."),
    click.option("--record-losses", is_flag=True, default=False,
                 help="Write a memory record for every lost battle."),
    click.option("--config", "config_file", default=None, metavar="JSON",
                 help="Run config file; explicit flags override it."),
]


def _with_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func

    return wrap


def _transport_flags(record_cassette, replay_cassette) -> dict:
    if record_cassette and replay_cassette:
        click.echo("error: --record and --replay are mutually exclusive", err=True)
        sys.exit(2)
    if record_cassette:
        return {"transport": "record", "cassette_path": record_cassette}
    if replay_cassette:
        return {"transport": "replay", "cassette_path": replay_cassette}
    return {}


def _memory_flags(memory_store, record_losses) -> dict:
    if not memory_store:
        return {}
    return {
        "memory": {
            "enabled": True,
            "store_path": memory_store,
            "record_losses": record_losses,
        }
    }


def _print_metrics(metrics: dict) -> None:
    click.echo(
        f"mean win rate {metrics['mean_win_rate']:.3f}"
        f" (sem {metrics['sem_win_rate']:.3f})"
        f" over {metrics['repetitions']}x{metrics['battles_per_run']} battles"
    )
    click.echo(f"win counts: {metrics['win_counts']}")
    distribution = ", ".join(
        f"{key}={value:.3f}" for key, value in metrics["action_distribution"].items()
    )
    click.echo(f"action distribution: {distribution}")


@main.command("run-eval")
@_with_options(run_options)
@click.pass_context
def run_eval(ctx, config_file, record_cassette, replay_cassette,
             memory_store, record_losses, policy, **flags) -> None:
    """Run the full evaluation and write a run directory."""
    payload = _run_payload(config_file, policy=policy, **flags)
    payload.update(_transport_flags(record_cassette, replay_cassette))
    payload.update(_memory_flags(memory_store, record_losses))
    client = _client(ctx)
    try:
        result = client.post("/runs", payload)
    except ServiceError as exc:
        _fail(exc)
    finally:
        client.close()
    click.echo(f"run written to {result['run_dir']}")
    _print_metrics(result["metrics"])


@main.command()
@_with_options(run_options)
@click.pass_context
def ablate(ctx, config_file, record_cassette, replay_cassette,
           memory_store, record_losses, policy, mask, **flags) -> None:
    """Run all four ablation masks with a shared encounter schedule."""
    if mask is not None:
        click.echo("note: --mask is ignored; the sweep covers every mask", err=True)
    payload = _run_payload(config_file, policy=policy, **flags)
    payload.update(_transport_flags(record_cassette, replay_cassette))
    payload.update(_memory_flags(memory_store, record_losses))
    client = _client(ctx)
    try:
        result = client.post("/ablations", payload)
    except ServiceError as exc:
        _fail(exc)
    finally:
        client.close()
    click.echo(f"sweep written to {result['sweep_dir']}")
    for slug, metrics in result["variants"].items():
        click.echo(
            f"  {slug:<10} mean win rate {metrics['mean_win_rate']:.3f}"
            f" (sem {metrics['sem_win_rate']:.3f})"
        )


@main.command()
@click.option("--cassette", required=True, metavar="CASSETTE",
              help="Cassette recorded earlier with --record.")
@_with_options(run_options)
@click.pass_context
def replay(ctx, cassette, config_file, record_cassette, replay_cassette,
           memory_store, record_losses, policy, **flags) -> None:
    """Re-run an LLM evaluation from a cassette; no network traffic."""
    if record_cassette or replay_cassette:
        click.echo("error: use --cassette with the replay command", err=True)
        sys.exit(2)
    if policy not in (None, "llm"):
        click.echo("error: replay implies --policy llm", err=True)
        sys.exit(2)
    payload = _run_payload(config_file, policy="llm", **flags)
    payload.update({"transport": "replay", "cassette_path": cassette})
    payload.update(_memory_flags(memory_store, record_losses))
    client = _client(ctx)
    try:
        result = client.post("/runs", payload)
    except ServiceError as exc:
        _fail(exc)
    finally:
        client.close()
    click.echo(f"replayed run written to {result['run_dir']}")
    _print_metrics(result["metrics"])


@main.command()
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--battles", "battles_per_run", type=int, default=50, show_default=True)
@click.option("--mask", type=click.Choice(MASK_CHOICES), default="full",
              show_default=True)
@click.option("--checkpoint", "checkpoint_path", default=None)
@click.option("--encounters", "encounter_path", default=None)
@click.pass_context
def play(ctx, seed, battles_per_run, mask, checkpoint_path, encounter_path) -> None:
    """Play the gauntlet yourself at the console."""
    client = _client(ctx)
    payload = {
        "seed": seed,
        "battles_per_run": battles_per_run,
        "mask": mask,
        "checkpoint_path": checkpoint_path,
        "encounter_path": encounter_path,
    }
    payload = {key: value for key, value in payload.items() if value is not None}
    try:
        session = client.post("/sessions", payload)
    except ServiceError as exc:
        client.close()
        _fail(exc)
    session_id = session["session_id"]
    try:
        while not session["finished"]:
            observation = session["observation"]
            click.echo(observation["prompt"])
            click.echo("")
            menu = observation["menu"]
            for position, entry in enumerate(menu, start=1):
                click.echo(f"  [{position}] {entry['label']}")
            choice = None
            while choice is None:
                try:
                    raw = click.prompt("action", prompt_suffix="> ")
                except (click.Abort, EOFError):
                    click.echo("session aborted", err=True)
                    sys.exit(EXIT_INTERACTIVE_ABORT)
                raw = raw.strip()
                if raw.isdigit() and 1 <= int(raw) <= len(menu):
                    choice = menu[int(raw) - 1]
                else:
                    click.echo(f"  enter a number between 1 and {len(menu)}")
            step = client.post(f"/sessions/{session_id}/actions", choice["wire"])
            for line in step["lines"]:
                click.echo(line)
            if not step["accepted"]:
                click.echo(f"  rejected: {step['error']}")
            session = {
                "finished": step["finished"],
                "observation": step["observation"],
                "result": step.get("result"),
            }
        result = session["result"]
        click.echo(
            f"finished: {result['wins']}/{result['battles_per_run']} battles won"
        )
    except ServiceError as exc:
        _fail(exc)
    finally:
        client.close()


@main.command("pilot-memory")
@click.option("--store", "store_path", default=None, metavar="PATH",
              help="Persist the pilot store here (default: ephemeral).")
@click.pass_context
def pilot_memory(ctx, store_path) -> None:
    """Seed one defeat memory and show how it changes the next decision."""
    client = _client(ctx)
    try:
        result = client.post(
            "/pilot-memory", {"store_path": store_path} if store_path else {}
        )
    except ServiceError as exc:
        _fail(exc)
    finally:
        client.close()
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@main.command("validate-data")
@click.pass_context
def validate_data(ctx) -> None:
    """Check every data file and prompt template; exit 3 on problems."""
    client = _client(ctx)
    try:
        report = client.get("/data/validation")
    except ServiceError as exc:
        _fail(exc)
    finally:
        client.close()
    for entry in report["files"]:
        status = "ok" if entry["ok"] else f"FAIL: {entry['error']}"
        click.echo(f"{entry['path']}: {status}")
    if not report["ok"]:
        sys.exit(EXIT_DATA_ERROR)
    click.echo(f"all data files valid under {report['root']}")


@main.command("compact-memory")
@click.option("--store", "store_path", required=True, metavar="PATH")
@click.pass_context
def compact_memory(ctx, store_path) -> None:
    """Rewrite a memory store, dropping superseded duplicate records."""
    client = _client(ctx)
    try:
        result = client.post("/memory/compaction", {"store_path": store_path})
    except ServiceError as exc:
        _fail(exc)
    finally:
        client.close()
    click.echo(
        f"{result['store_path']}: {result['records']} records kept,"
        f" {result['removed']} removed"
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
@click.pass_context
def serve(ctx, host, port) -> None:
    """Run the HTTP service."""
    import uvicorn

    from pokegauntlet.service.app import create_app

    uvicorn.run(create_app(ctx.obj.get("root")), host=host, port=port)


if __name__ == "__main__":
    main()
