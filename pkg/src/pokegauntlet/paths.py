"""Locate the repository data root.

Data files (type chart, species, encounter tables, prompts) live outside the
installed package so they stay human-editable. Resolution order: explicit
argument, ``POKEGAUNTLET_ROOT``, then walking up from the working directory
looking for the ``data/`` + ``prompts/`` pair.
"""

from __future__ import annotations

import os
from pathlib import Path

ROOT_ENV_VAR = "POKEGAUNTLET_ROOT"

_MARKERS = ("data", "prompts")


class RootNotFoundError(FileNotFoundError):
    """No directory containing data/ and prompts/ could be located."""


def _looks_like_root(path: Path) -> bool:
    return all((path / marker).is_dir() for marker in _MARKERS)


def find_root(explicit: str | os.PathLike[str] | None = None) -> Path:
    if explicit is not None:
        root = Path(explicit).resolve()
        if not _looks_like_root(root):
            raise RootNotFoundError(
                f"{root} does not contain the expected data/ and prompts/ directories"
            )
        return root

    env = os.environ.get(ROOT_ENV_VAR)
    if env:
        return find_root(env)

    current = Path.cwd().resolve()
    for candidate in (current, *current.parents):
        if _looks_like_root(candidate):
            return candidate
    raise RootNotFoundError(
        f"could not find a data root from {current}; set {ROOT_ENV_VAR} or pass --root"
    )


def default_checkpoint_path(root: Path) -> Path:
    return root / "data" / "checkpoints" / "mt_moon_default.json"


def default_encounter_path(root: Path) -> Path:
    return root / "data" / "encounters" / "mt_moon.json"


def default_prompt_path(root: Path) -> Path:
    return root / "prompts" / "battle_v1.txt"
