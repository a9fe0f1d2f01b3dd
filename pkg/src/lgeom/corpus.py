"""The bundled model corpus, loaded by name from package data."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .model import FiniteModel, load_model, model_from_dict

__all__ = ["CORPUS", "corpus_names", "get_model", "resolve_model"]

CORPUS = ("trivial", "z2", "z3", "z3-relabeled", "z4", "v4", "s3", "z2p", "q3")


def corpus_names() -> tuple[str, ...]:
    return CORPUS


@lru_cache(maxsize=None)
def get_model(name: str) -> FiniteModel:
    if name not in CORPUS:
        raise KeyError(f"no bundled model named {name!r} (have: {', '.join(CORPUS)})")
    text = resources.files("lgeom").joinpath("corpus", f"{name}.json").read_text()
    return model_from_dict(json.loads(text), name=name)


def resolve_model(ref: str) -> FiniteModel:
    """A bundled model name, or a path to a model JSON file."""
    if ref in CORPUS:
        return get_model(ref)
    p = Path(ref)
    if p.suffix == ".json" or p.exists():
        return load_model(p)
    raise KeyError(f"unknown model {ref!r}: not a bundled name or a file")
