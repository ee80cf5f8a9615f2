"""Power-map towers: the normal form of indiscrete grand-orbit relations.

A :class:`CoveringTower` is a sequence of round annuli (or punctured discs)
with dynamics ``z -> z**d_n`` between consecutive levels.  Moduli are kept
exact: ``mu_n = mu_0 * D_n`` with ``mu_0`` a :class:`fractions.Fraction` and
``D_n = d_0 ... d_{n-1}`` a Python integer.

Orbit points are tracked through ``log|z|`` and ``arg z`` so that deep levels
(``|z| = s**(2**n)``) stay representable.
"""

from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import hypgeo
from .errors import DomainError

ANNULUS = "annulus"
PUNCTURED_DISC = "punctured_disc"
MAX_ENUMERATED_FIBER = 1 << 16


@dataclass(frozen=True)
class DegreeRule:
    """``d_n`` generator: ``constant``, ``periodic`` (a repeating pattern) or ``eventual``.

    ``eventual`` uses ``head`` for the first terms and then ``tail`` forever.
    """

    kind: str
    pattern: tuple[int, ...] = ()
    head: tuple[int, ...] = ()
    tail: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "periodic", "eventual"):
            raise DomainError(f"unknown degree rule {self.kind!r}")
        values = list(self.pattern) + list(self.head) + [self.tail]
        if self.kind in ("constant", "periodic") and not self.pattern:
            raise DomainError(f"{self.kind} rule needs a non-empty pattern")
        for d in values:
            if int(d) != d or d < 1:
                raise DomainError(f"degrees must be integers >= 1, got {d!r}")

    @classmethod
    def constant(cls, d: int) -> "DegreeRule":
        return cls("constant", pattern=(int(d),))

    @classmethod
    def periodic(cls, pattern: Sequence[int]) -> "DegreeRule":
        return cls("periodic", pattern=tuple(int(d) for d in pattern))

    @classmethod
    def eventual(cls, head: Sequence[int], tail: int) -> "DegreeRule":
        return cls("eventual", head=tuple(int(d) for d in head), tail=int(tail))

    def __call__(self, n: int) -> int:
        if self.kind in ("constant", "periodic"):
            return self.pattern[n % len(self.pattern)]
        return self.head[n] if n < len(self.head) else self.tail

    @property
    def ge2_infinitely_often(self) -> bool:
        if self.kind == "eventual":
            return self.tail >= 2
        return any(d >= 2 for d in self.pattern)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            params = {"d": self.pattern[0]}
        elif self.kind == "periodic":
            params = {"pattern": list(self.pattern)}
        else:
            params = {"head": list(self.head), "tail": self.tail}
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> "DegreeRule":
        kind = d.get("kind")
        params = d.get("params", {})
        if isinstance(params, list):
            # shorthand: [d] for constant, the pattern for periodic
            params = {"d": params[0]} if kind == "constant" and len(params) == 1 else {"pattern": params}
        if not isinstance(params, dict):
            raise DomainError("degree rule params must be an object or a list")
        if kind == "constant":
            return cls.constant(params["d"])
        if kind == "periodic":
            return cls.periodic(params["pattern"])
        if kind == "eventual":
            return cls.eventual(params.get("head", []), params["tail"])
        raise DomainError(f"unknown degree rule {kind!r}")


class CoveringTower:
    def __init__(self, kind: str, degrees: DegreeRule, mu0=None):
        if kind not in (ANNULUS, PUNCTURED_DISC):
            raise DomainError(f"tower kind must be {ANNULUS!r} or {PUNCTURED_DISC!r}")
        if kind == ANNULUS:
            if mu0 is None:
                raise DomainError("annulus towers need an initial modulus mu0")
            mu = Fraction(str(mu0)) if isinstance(mu0, float) else Fraction(mu0)
            if mu <= 0:
                raise DomainError(f"mu0 must be positive, got {mu0}")
        else:
            mu = None
        self.kind = kind
        self.mu0 = mu
        self.degrees = degrees
        self._D = [1]
        self._lock = threading.Lock()

    @property
    def tail_meta(self) -> dict:
        return {"degree_ge2_infinitely_often": self.degrees.ge2_infinitely_often}

    def degree(self, n: int) -> int:
        return self.degrees(n)

    def total_degree(self, n: int) -> int:
        """``D_n = d_{n-1} ... d_0`` (``D_0 = 1``), memoized."""
        if n < len(self._D):
            return self._D[n]
        with self._lock:
            while len(self._D) <= n:
                k = len(self._D) - 1
                self._D.append(self._D[-1] * self.degrees(k))
        return self._D[n]

    def modulus_exact(self, n: int) -> Fraction:
        if self.kind != ANNULUS:
            raise DomainError("punctured-disc towers carry no modulus")
        return self.mu0 * self.total_degree(n)

    def annulus(self, n: int) -> hypgeo.StdAnnulus:
        return hypgeo.StdAnnulus(push_modulus(self, n))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "degrees": self.degrees.to_dict()}
        if self.mu0 is not None:
            d["mu0"] = float(self.mu0)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoveringTower":
        return cls(d["kind"], DegreeRule.from_dict(d["degrees"]), d.get("mu0"))

    def __repr__(self):
        return f"CoveringTower({self.to_dict()!r})"


@dataclass(frozen=True)
class TowerPoint:
    """A point of level ``n`` stored as ``(log|z|, arg z)``."""

    n: int
    log_radius: float
    angle: float

    @classmethod
    def from_complex(cls, n: int, z: complex) -> "TowerPoint":
        z = complex(z)
        if z == 0:
            raise DomainError("tower points avoid the origin")
        return cls(n, math.log(abs(z)), cmath.phase(z))

    @property
    def z(self) -> complex:
        return cmath.rect(math.exp(self.log_radius), self.angle)


def check_point(tower: CoveringTower, p: TowerPoint) -> None:
    if not p.log_radius < 0.0:
        raise DomainError(f"|z| must be < 1, got log|z| = {p.log_radius}")
    if tower.kind == ANNULUS:
        inner = -2.0 * math.pi * push_modulus(tower, p.n)
        if not p.log_radius > inner:
            raise DomainError(f"point below the inner boundary of level {p.n}")


def push_modulus(tower: CoveringTower, n: int) -> float:
    """``mu_n = mu_0 D_n``, correctly rounded from exact rational arithmetic."""
    mu = tower.modulus_exact(n)
    try:
        return float(mu)
    except OverflowError as exc:
        raise DomainError(f"modulus at level {n} exceeds double precision") from exc


def tower_map(tower: CoveringTower, p: TowerPoint) -> TowerPoint:
    """``(n, z) -> (n + 1, z**d_n)``."""
    d = tower.degree(p.n)
    angle = math.remainder(d * p.angle, 2.0 * math.pi)
    return TowerPoint(p.n + 1, d * p.log_radius, angle)


# ---------------------------------------------------------------------------
# conjugacy residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotatedPower:
    """The covering ``z -> exp(i alpha) z**degree`` between round models."""

    alpha: float
    degree: int

    def __call__(self, z):
        return np.exp(1j * self.alpha) * np.asarray(z, dtype=np.complex128) ** self.degree


def rotation_corrections(maps: Sequence[RotatedPower], beta0: float = 0.0) -> list[float]:
    """Angles ``beta_n`` with ``phi_n(z) = exp(i beta_n) z`` conjugating the maps to powers.

    Solves ``beta_{n+1} = d_n beta_n - alpha_n``.
    """
    betas = [float(beta0)]
    for f in maps:
        betas.append(math.remainder(f.degree * betas[-1] - f.alpha, 2.0 * math.pi))
    return betas


def conjugacy_residual(tower: CoveringTower, perturbed_maps: Sequence[RotatedPower], grid, phis=None) -> float:
    """``sup |phi_{n+1}(f_n(z)) - phi_n(z)**d_n|`` over pushed-forward grid points.

    ``grid`` is a set of level-0 points; level-``n`` samples are their images
    under ``f_{n-1} o ... o f_0``.  ``phis`` lists the rotation angles of the
    uniformizers (default: the exact corrections) or callables.
    """
    maps = list(perturbed_maps)
    for n, f in enumerate(maps):
        if f.degree != tower.degree(n):
            raise DomainError(f"map {n} has degree {f.degree}, tower expects {tower.degree(n)}")
    if phis is None:
        phis = rotation_corrections(maps)
    if len(phis) < len(maps) + 1:
        raise DomainError("need one uniformizer per level")
    funcs = [p if callable(p) else _rotation(p) for p in phis]
    z = np.asarray(grid, dtype=np.complex128).reshape(-1)
    worst = 0.0
    for n, f in enumerate(maps):
        lhs = funcs[n + 1](f(z))
        rhs = funcs[n](z) ** f.degree
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        z = f(z)
    return worst


def _rotation(beta):
    u = complex(math.cos(beta), math.sin(beta))
    return lambda z: u * np.asarray(z, dtype=np.complex128)


# ---------------------------------------------------------------------------
# indiscreteness witnesses
# ---------------------------------------------------------------------------


def fiber_turns(tower: CoveringTower, k: int) -> list[Fraction]:
    """Angular offsets, in turns, of the level-0 fiber of ``z -> z**D_k`` over one point.

    Built by extracting ``d_j``-th roots level by level; exact rationals.
    """
    offsets = [Fraction(0)]
    for j in range(k - 1, -1, -1):
        d = tower.degree(j)
        # pull back through z -> z**d: each offset t gives (t + i) / d
        offsets = [(t + i) / d for t in offsets for i in range(d)]
    return sorted(offsets)


def indiscreteness_witness(tower: CoveringTower, p: TowerPoint, k: int) -> float:
    """Minimal angular gap (radians) between points of ``f^{-k}(f^k(p))`` on ``p``'s circle.

    Equals ``2 pi / D_k``; small fibers are enumerated by explicit root
    extraction, huge ones fall back to the closed form.
    """
    check_point(tower, p)
    D = tower.total_degree(k)
    if D == 1:
        return 2.0 * math.pi
    if D <= MAX_ENUMERATED_FIBER:
        turns = fiber_turns(tower, k)
        gaps = [b - a for a, b in zip(turns, turns[1:])]
        gaps.append(1 + turns[0] - turns[-1])
        return float(2 * min(gaps)) * math.pi
    return 2.0 * math.pi / D


def fiber_points(tower: CoveringTower, p: TowerPoint, k: int) -> np.ndarray:
    """All level-0 points with the same level-``k`` image as ``p``."""
    turns = fiber_turns(tower, k)
    r = math.exp(p.log_radius)
    return np.array([cmath.rect(r, p.angle + 2.0 * math.pi * float(t)) for t in turns])


# ---------------------------------------------------------------------------
# injectivity decay
# ---------------------------------------------------------------------------


@dataclass
class InjDecay:
    values: list[float]
    truncated: bool = False
    outside_collar: list[int] | None = None


def inj_decay(tower: CoveringTower, p: TowerPoint, n_max: int = 20) -> InjDecay:
    """Injectivity radius of ``V_n`` at the orbit points ``f^n(p)`` for ``n <= n_max``.

    Annuli: the relative height ``t`` of the orbit point is invariant under
    ``z -> z**d``, and ``inj`` follows from the level modulus ``mu_n``.
    Punctured discs: the horocycle coordinate drops by ``log d_n`` each step
    and ``inj = exp(p) / 2``.
    """
    check_point(tower, p)
    out: list[float] = []
    if tower.kind == ANNULUS:
        mu_p = push_modulus(tower, p.n)
        t = 1.0 + p.log_radius / (2.0 * math.pi * mu_p)
        for n in range(p.n, p.n + n_max + 1):
            try:
                mu = push_modulus(tower, n)
            except DomainError:
                return InjDecay(out, truncated=True)
            out.append(hypgeo.injectivity_from_height(mu, t))
        return InjDecay(out)

    # punctured disc: horocycle length 2 pi / log(1/|z|) = exp(coord)
    coord = math.log(2.0 * math.pi / -p.log_radius)
    outside = []
    for n in range(p.n, p.n + n_max + 1):
        if coord <= hypgeo.CUSP_COLLAR_BOUNDARY:
            out.append(hypgeo.cusp_injectivity(coord))
        else:
            outside.append(n)
            out.append(0.5 * math.exp(coord))
        coord -= math.log(tower.degree(n))
    return InjDecay(out, outside_collar=outside)
