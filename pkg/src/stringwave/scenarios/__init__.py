"""Shipped scenarios: TOML configs bundled with the package."""
from __future__ import annotations

from importlib import resources

from ..config import RunConfig, parse_text


def list_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__package__).iterdir() if p.name.endswith(".toml"))


def scenario_text(name: str) -> str:
    path = resources.files(__package__) / f"{name}.toml"
    if not path.is_file():
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(list_scenarios())}")
    return path.read_text()


def load_scenario(name: str) -> RunConfig:
    return parse_text(scenario_text(name), ".toml")
