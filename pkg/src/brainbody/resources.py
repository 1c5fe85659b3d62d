"""Locate data files shipped inside the package."""

from __future__ import annotations

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent / "data"


def path(*parts: str) -> Path:
    return DATA_DIR.joinpath(*parts)
