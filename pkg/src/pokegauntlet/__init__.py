"""Deterministic Gen-1-style battle engine with an evaluation gauntlet.

The package is organised in layers:

- ``engine``: pure battle mechanics (stats, damage, statuses, turn loop).
- ``gamedata``: loads and validates the data files that parameterise the
  engine (type chart, stage tables, moves, species).
- ``scenario``: wild-encounter sampling and checkpoint loading.
- ``agentio``: state serialization to prompts and action parsing/validation.
- ``policies`` / ``llm``: decision makers (random, heuristic, human, LLM)
  and the chat-completions transport with record/replay support.
- ``memory``: long-term JSONL memory store with scored retrieval.
- ``harness``: gauntlet runner, aggregation, ablations, and run logging.
- ``service`` / ``cli``: FastAPI app wrapping the above, and a thin client.
"""

__version__ = "0.1.0"
