"""Reference values for the builtin scenarios and bundled fixtures.

``data/golden.json`` holds, per scenario, the expected facet and class
counts and one row per inequivalent nontrivial class: orbit size, a
representative inequality and the reported numeric columns
(``Qs2``, ``omega2``, ``Q1`` and scenario-specific extras such as
``Qs3``, ``QUB2`` or ``Q1proj``). Per-column tolerances are stored next to
the values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Optional

from .pipeline import Inequality, parse_inequality
from .scenario import Scenario, get_scenario


@dataclass
class GoldenRow:
    orbit: int
    inequality: Inequality
    text: str
    values: Dict[str, float] = field(default_factory=dict)
    name: Optional[str] = None

    def label(self, i: int) -> str:
        return self.name or f"row{i + 1}"


@lru_cache(maxsize=None)
def _raw() -> dict:
    with resources.files(__package__).joinpath("data/golden.json").open() as fh:
        return json.load(fh)


def tolerances() -> Dict[str, float]:
    return dict(_raw()["tolerances"])


def scenario_keys() -> List[str]:
    return sorted(_raw()["scenarios"])


def counts(key: str) -> Dict[str, int]:
    """Expected counts; keys among ``facets``, ``trivial``, ``nontrivial``, ``classes``."""
    entry = _raw()["scenarios"][key]
    return {k: v for k, v in entry.items() if isinstance(v, int)}


def convention(key: str) -> str:
    """Class-counting convention the reference table follows (see ``cli._classes``)."""
    return _raw()["scenarios"][key].get("convention", "tables")


def rows(key: str, s: Optional[Scenario] = None) -> List[GoldenRow]:
    s = s or get_scenario(key)
    out = []
    for r in _raw()["scenarios"][key]["rows"]:
        out.append(GoldenRow(r["orbit"], parse_inequality(r["inequality"], s), r["inequality"],
                             dict(r.get("values", {})), r.get("name")))
    return out


def trivial_rows(key: str, s: Optional[Scenario] = None) -> List[GoldenRow]:
    s = s or get_scenario(key)
    return [GoldenRow(r["orbit"], parse_inequality(r["inequality"], s), r["inequality"])
            for r in _raw()["scenarios"][key].get("trivial_classes", [])]


def named(key: str, name: str) -> Inequality:
    """Inequality of the row labelled ``name`` (for example ``"I7"``)."""
    for r in rows(key):
        if r.name == name:
            return r.inequality
    raise KeyError(f"no row named {name!r} in {key}")


def fixture_path(name: str):
    """Path of a bundled file in the package data directory."""
    return resources.files(__package__).joinpath("data", name)


def two_state_model_s2():
    """Two-ontic-state model of scenario s2 that saturates ``I2 = 2``.

    Epistemic states ``mu(l1|x) = (0, 1, 0, 2/3)`` and
    ``mu(l2|x) = (1, 0, 1, 1/3)``; ``l1`` answers 0 to measurement 0 and
    ``l2`` answers 1 to measurements 0 and 1. Responses left open by that
    description are fixed to outcome 1.
    """
    from .quantum import OntologicalModel
    F = Fraction
    mu = [[F(0), F(1), F(0), F(2, 3)], [F(1), F(0), F(1), F(1, 3)]]
    # response vectors indexed y * 2 + z
    xi = [[F(1), F(0), F(0), F(1), F(0), F(1)],
          [F(0), F(1), F(0), F(1), F(0), F(1)]]
    return OntologicalModel(mu, xi)
