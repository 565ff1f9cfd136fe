#!/usr/bin/env python3
"""Record the committed test cassette against a local scripted endpoint.

Starts a deterministic chat-completions server on 127.0.0.1, runs a small
LLM-policy evaluation through the live transport in record mode, then
writes the cassette and the resulting metrics under tests/fixtures/. The
replay test compares a cassette-driven rerun against those metrics.

The scripted model reads the valid-action lines out of the prompt and
answers with the first damaging move. A slice of replies (keyed off a
hash of the prompt, so stable across recordings) are wrapped in prose or
are unusable on purpose, to exercise tolerant parsing and the retry loop.

Usage: python3 scripts/record_fixture_cassette.py [--root DIR]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from pokegauntlet.gamedata import load_game_data  # noqa: E402
from pokegauntlet.harness import RunConfig, repeat_and_aggregate  # noqa: E402
from pokegauntlet.llm import LlmEndpointConfig  # noqa: E402

CASSETTE = REPO / "tests" / "fixtures" / "cassettes" / "llm_small.jsonl"
METRICS = REPO / "tests" / "fixtures" / "llm_small_metrics.json"

SEED = 23
BATTLES = 3
REPETITIONS = 2

WIRE_LINE = re.compile(r'^(\{"action".*?\}) = (.*)$', re.MULTILINE)


def scripted_reply(user_text: str) -> str:
    """Deterministic stand-in for a model: pick from the action list."""
    entries = [(m.group(1), m.group(2)) for m in WIRE_LINE.finditer(user_text)]
    if not entries:
        return "I see no actions here."
    chosen = None
    for wire, label in entries:
        if label.startswith("use ") and "power" in label:
            chosen = wire
            break
    if chosen is None:
        chosen = entries[0][0]
    knob = int.from_bytes(
        hashlib.sha256(user_text.encode("utf-8")).digest()[:4], "big"
    )
    if knob % 9 == 0:
        return "Hmm, a tough spot. Let me think about type matchups first."
    if knob % 5 == 0:
        return f"Given the matchup I will go with {chosen} and press the attack."
    return chosen


class ChatHandler(BaseHTTPRequestHandler):
    def do_POST(self) -> None:  # noqa: N802 - http.server API
        if self.path.rstrip("/").endswith("/chat/completions"):
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length))
            user_text = payload["messages"][-1]["content"]
            body = {
                "id": "scripted",
                "object": "chat.completion",
                "model": payload.get("model", "scripted"),
                "choices": [
                    {
                        "index": 0,
                        "message": {
                            "role": "assistant",
                            "content": scripted_reply(user_text),
                        },
                        "finish_reason": "stop",
                    }
                ],
            }
            raw = json.dumps(body).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)
        else:
            self.send_response(404)
            self.end_headers()

    def log_message(self, *args) -> None:
        return None


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", default=str(REPO))
    args = parser.parse_args()

    server = ThreadingHTTPServer(("127.0.0.1", 0), ChatHandler)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()

    CASSETTE.unlink(missing_ok=True)
    data = load_game_data(args.root)
    config = RunConfig(
        seed=SEED,
        battles_per_run=BATTLES,
        repetitions=REPETITIONS,
        policy_kind="llm",
        transport="record",
        cassette_path=str(CASSETTE),
        output_dir=str(REPO / "runs"),
        run_id="llm-fixture-recording",
        llm=LlmEndpointConfig(
            base_url=f"http://127.0.0.1:{port}",
            model_name="scripted-1",
        ),
    )
    try:
        metrics, run_dir = repeat_and_aggregate(data, config)
    finally:
        server.shutdown()
        server.server_close()

    METRICS.write_text(
        json.dumps(metrics.as_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    exchanges = sum(1 for _ in CASSETTE.open(encoding="utf-8"))
    print(f"recorded {exchanges} exchanges to {CASSETTE}")
    print(f"metrics written to {METRICS} (run dir: {run_dir})")
    print(
        f"mean win rate {metrics.mean_win_rate:.3f} over"
        f" {REPETITIONS}x{BATTLES} battles"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
