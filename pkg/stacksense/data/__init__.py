"""
Data files shipped with stacksense: encoding inventories, label maps, RPC profiles
and the default OS distribution.
"""
import json
from pathlib import Path
from typing import Any


DATA_DIR = Path(__file__).parent


def path(name: str) -> Path:
    return DATA_DIR / name


def load_json(name: str) -> Any:
    with open(path(name), encoding="utf-8") as f:
        return json.load(f)


def read_text(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
