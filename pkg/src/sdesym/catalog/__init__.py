"""Executable encodings of the worked examples: models, claimed symmetries,
invariants, transforms, exact solutions and attractivity expectations.

The JSON files store claims only; :mod:`sdesym.catalog.runner` re-derives
every expected verdict with the checking modules.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from ..exprcore import parse
from ..invariants import InvariantCandidate
from ..levelset import LevelSetSpec, sampler_from_dict
from ..model import ItoSDE, model_from_dict
from ..reduction import Transform, transform_from_dict
from ..symmetry import SimpleVectorField, field_from_dict
from .exact import exact_solution

CATALOG_VERSION = "v1"
DATA = f"data/{CATALOG_VERSION}"


class CatalogError(ValueError):
    pass


def _expand(text: str, macros: Mapping[str, str]) -> str:
    # repeat so macros may refer to each other
    for _ in range(5):
        new = text
        for k, v in macros.items():
            new = re.sub(rf"\b{re.escape(k)}\b", v, new)
        if new == text:
            return new
        text = new
    return text


@dataclass
class CatalogEntry:
    name: str
    raw: dict = field(repr=False)

    @property
    def title(self) -> str:
        return self.raw.get("title", "")

    @property
    def provenance(self) -> str:
        return self.raw.get("provenance", "")

    @property
    def macros(self) -> dict:
        return self.raw.get("macros", {})

    def expand(self, text: str) -> str:
        return _expand(str(text), self.macros)

    def variants(self) -> list:
        v = self.raw.get("variants")
        return list(v) if v else [None]

    def _model_doc(self, doc: Mapping, variant: str | None, overrides: Mapping | None) -> dict:
        d = dict(doc)
        consts = dict(d.get("constants") or {})
        if variant is not None:
            consts.update(self.raw.get("variants", {})[variant])
        if overrides:
            unknown = set(overrides) - set(consts)
            if unknown:
                raise CatalogError(f"unknown constants {sorted(unknown)} for {self.name}")
            consts.update(overrides)
        d["constants"] = consts
        d["drift"] = [self.expand(s) for s in d["drift"]]
        d["diffusion"] = [[self.expand(s) for s in row] for row in d["diffusion"]]
        d.setdefault("name", self.name if variant is None else f"{self.name}[{variant}]")
        return d

    def model_dict(self, variant: str | None = None, overrides: Mapping | None = None) -> dict:
        return self._model_doc(self.raw["model"], variant, overrides)

    def model(self, variant: str | None = None, overrides: Mapping | None = None) -> ItoSDE:
        return model_from_dict(self.model_dict(variant, overrides))

    def alt_model(self, key: str, overrides: Mapping | None = None) -> ItoSDE:
        doc = self.raw.get("alt_models", {}).get(key)
        if doc is None:
            raise CatalogError(f"{self.name} has no alternative model {key!r}")
        d = self._model_doc(doc, None, overrides)
        d["name"] = f"{self.name}:{key}"
        return model_from_dict(d)

    def parse(self, sde, text: str):
        return parse(self.expand(text), (sde.n, sde.m), sde.constants)

    def parse_y(self, sde, text: str):
        """Parse an expression written in the transformed coordinates y."""
        return parse(self.expand(text), (sde.n, sde.m), sde.constants, state_symbol="y")

    def symmetry_specs(self) -> list:
        return self.raw.get("symmetries", [])

    def field(self, sde, spec: Mapping) -> SimpleVectorField:
        d = dict(spec)
        d["phi"] = [self.expand(p) for p in spec["phi"]]
        return field_from_dict(d, sde.n, sde.m, sde.constants)

    def fields(self, sde) -> dict:
        return {s["name"]: self.field(sde, s) for s in self.symmetry_specs()}

    def invariant_specs(self) -> list:
        return self.raw.get("invariants", [])

    def invariant(self, sde, spec: Mapping) -> InvariantCandidate:
        J = self.parse(sde, spec["J"])
        levels = tuple(
            LevelSetSpec(J, float(ls["c"]), sampler_from_dict(ls.get("sampler")) if ls.get("sampler") else _default_sampler(sde))
            for ls in spec.get("level_sets", [])
        )
        return InvariantCandidate(J, spec.get("kind"), spec["name"], levels)

    def transform_specs(self) -> list:
        return self.raw.get("transforms", [])

    def transform(self, sde, spec: Mapping) -> Transform:
        d = dict(spec)
        d["forward"] = [self.expand(s) for s in spec["forward"]]
        d["inverse"] = [self.expand(s) for s in spec["inverse"]]
        return transform_from_dict(d, sde)

    def exact(self, sde):
        e = self.raw.get("exact")
        if not e:
            return None
        return exact_solution(e["kind"], sde.constants), list(e.get("x0", []))


def _default_sampler(sde):
    from ..levelset import NewtonProjection

    return NewtonProjection(sde.sample_box)


def expected_for(value, variant):
    """Claims may be a plain value or a per-variant mapping."""
    if isinstance(value, Mapping) and variant is not None and variant in value:
        return value[variant]
    return value


def _data_dir():
    return resources.files(__name__).joinpath(DATA)


def entry_names() -> list:
    return sorted(p.name[:-5] for p in _data_dir().iterdir() if p.name.endswith(".json"))


def load_entry(name: str) -> CatalogEntry:
    p = _data_dir().joinpath(f"{name}.json")
    if not p.is_file():
        raise CatalogError(f"no catalog entry named {name!r}; available: {', '.join(entry_names())}")
    raw = json.loads(p.read_text(encoding="utf-8"))
    validate_entry(raw)
    return CatalogEntry(raw["name"], raw)


def catalog_entries() -> list:
    return [load_entry(n) for n in entry_names()]


_REQUIRED = ("name", "model", "provenance")


def validate_entry(raw: Mapping) -> None:
    for k in _REQUIRED:
        if k not in raw:
            raise CatalogError(f"catalog entry lacks {k!r}")
    for key in ("symmetries", "invariants", "transforms", "brackets"):
        if key in raw and not isinstance(raw[key], list):
            raise CatalogError(f"{key} must be a list")
    names = [s["name"] for s in raw.get("symmetries", [])]
    if len(names) != len(set(names)):
        raise CatalogError("duplicate symmetry names")
    for b in raw.get("brackets", []):
        for k in ("a", "b"):
            if b[k] not in names:
                raise CatalogError(f"bracket refers to unknown field {b[k]!r}")


__all__ = [
    "CATALOG_VERSION",
    "CatalogEntry",
    "CatalogError",
    "catalog_entries",
    "entry_names",
    "expected_for",
    "load_entry",
    "validate_entry",
]
