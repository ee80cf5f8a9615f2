"""Teichmüller dimension of the grand-orbit quotient of a wandering domain.

Each component of ``F^(f) ∩ U`` (up to grand orbits) contributes

* ``inf`` when its grand-orbit relation is discrete,
* ``1`` when it is indiscrete and the component is an annulus of finite modulus,
* ``0`` when it is indiscrete and the component is a punctured disc,

and the total is the sum.  Heuristic relation verdicts never reach this
module as Discrete/Indiscrete: they become ``Undetermined`` and the
dimension becomes ``Unknown``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .errors import DomainError
from .orbitrel import Relation, RelationVerdict


class ComponentKind(str, enum.Enum):
    ANNULUS = "FiniteModulusAnnulus"
    PUNCTURED_DISC = "PuncturedDisc"
    SIMPLY_CONNECTED = "SimplyConnectedPiece"
    OTHER = "Other"

    def __str__(self):
        return self.value


INFINITE = "inf"
UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ComponentReport:
    kind: ComponentKind
    relation: Relation
    modulus: float | None = None
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ComponentKind(self.kind))
        object.__setattr__(self, "relation", Relation(self.relation))
        if self.kind is ComponentKind.ANNULUS:
            if self.modulus is None or not (0.0 < float(self.modulus) < float("inf")):
                raise DomainError(f"annulus component needs a finite positive modulus, got {self.modulus!r}")
        elif self.modulus is not None:
            raise DomainError(f"{self.kind} components carry no modulus")
        if self.relation is Relation.INDISCRETE and self.kind not in (
            ComponentKind.ANNULUS,
            ComponentKind.PUNCTURED_DISC,
        ):
            raise DomainError(
                f"an indiscrete relation lives on a doubly connected component, not {self.kind}"
            )

    @classmethod
    def from_verdict(cls, kind, verdict: RelationVerdict, modulus=None, source="") -> "ComponentReport":
        """Heuristic verdicts are demoted to Undetermined."""
        rel = verdict.verdict if verdict.structural else Relation.UNDETERMINED
        return cls(kind, rel, modulus, source)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "relation": self.relation.value, "source": self.source}
        if self.modulus is not None:
            d["modulus"] = self.modulus
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentReport":
        return cls(d["kind"], d["relation"], d.get("modulus"), d.get("source", ""))


def component_dimension(c: ComponentReport):
    """``INFINITE``, ``1``, ``0`` or ``UNKNOWN``."""
    if c.relation is Relation.DISCRETE:
        return INFINITE
    if c.relation is Relation.UNDETERMINED:
        return UNKNOWN
    return 1 if c.kind is ComponentKind.ANNULUS else 0


@dataclass(frozen=True)
class DimensionVerdict:
    value: str  # "Infinite" | "Finite" | "Unknown"
    m: int | None = None
    breakdown: tuple = field(default_factory=tuple)

    def __str__(self):
        return f"Finite({self.m})" if self.value == "Finite" else self.value

    def rank(self) -> tuple[int, int]:
        """Sort key for Finite(m) < Finite(m+1) < Unknown < Infinite."""
        if self.value == "Finite":
            return (0, self.m)
        return (1, 0) if self.value == "Unknown" else (2, 0)

    def to_dict(self) -> dict:
        return {"value": str(self), "m": self.m, "breakdown": list(self.breakdown)}


def total_dimension(components: Iterable[ComponentReport], infinitely_many: bool = False) -> DimensionVerdict:
    """Dimension of the Teichmüller space of the grand-orbit quotient.

    ``infinitely_many`` marks a component list known to be infinite (each
    entry then stands for infinitely many grand orbits of its kind).
    """
    comps = list(components)
    breakdown = tuple(component_dimension(c) for c in comps)
    if INFINITE in breakdown:
        return DimensionVerdict("Infinite", None, breakdown)
    if infinitely_many and any(b == 1 for b in breakdown):
        return DimensionVerdict("Infinite", None, breakdown)
    if UNKNOWN in breakdown:
        return DimensionVerdict("Unknown", None, breakdown)
    return DimensionVerdict("Finite", sum(b for b in breakdown), breakdown)
