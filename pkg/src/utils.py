# -*- coding: utf-8 -*-
"""Utility functions for the project."""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel

DIGEST_LENGTH = 12


def get_cache_key(model: BaseModel) -> str:
    """Short md5 of a config's canonical JSON; equal configs share a key."""
    canonical = json.dumps(model.model_dump(mode="json"), sort_keys=True)
    return hashlib.md5(canonical.encode()).hexdigest()[:DIGEST_LENGTH]


def dumps(payload: Any) -> str:
    """Sorted-key, indented JSON with a trailing newline"""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_json(path: Path, payload: Any) -> None:
    """Write payload as JSON, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")


def write_text(path: Path, text: str) -> None:
    """UTF-8 write that creates missing parent directories"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def load_from_cache(path: Path) -> Optional[Dict[str, Any]]:
    """Previously written JSON document, or None."""
    path = Path(path)
    if path.exists():
        with open(path, "r", encoding="utf-8") as f:
            data: Dict[str, Any] = json.load(f)
            return data
    return None


def mean_std(values: Any) -> Dict[str, Optional[float]]:
    """Population mean and standard deviation; None for an empty sample"""
    array = np.asarray(list(values), dtype=float)
    if array.size == 0:
        return {"mean": None, "std": None}
    return {"mean": float(array.mean()), "std": float(array.std())}
