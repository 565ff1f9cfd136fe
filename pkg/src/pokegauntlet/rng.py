"""Seed derivation for independent, reproducible random streams.

Every stochastic component gets its own ``random.Random`` seeded from the
master seed plus a purpose tag. Encounter streams are keyed only by
(seed, repetition, battle), never by policy or ablation mask, so every
variant of an experiment faces the identical encounter schedule even when
battles diverge in length.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Hash the parts into a 64-bit seed; order matters."""
    text = "/".join(str(part) for part in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))


def encounter_stream(seed: int, repetition: int, battle: int) -> random.Random:
    return stream(seed, "rep", repetition, "battle", battle, "encounter")


def battle_stream(seed: int, repetition: int, battle: int) -> random.Random:
    return stream(seed, "rep", repetition, "battle", battle, "battle")


def policy_stream(seed: int, repetition: int) -> random.Random:
    return stream(seed, "rep", repetition, "policy")
