"""Hyperbolic geometry of the unit disc, round annuli and the punctured disc.

Curvature is normalized to -1 throughout: the disc carries the density
``2 / (1 - |z|^2)``, so ``hyp_dist(0, r) = log((1 + r) / (1 - r))``.

An annulus of modulus ``mu`` is always the round model
``{exp(-2 pi mu) < |z| < 1}``; its core geodesic ``|z| = sqrt(r)`` has
length ``pi / mu``.  Positions inside an annulus are often handled through
the *relative height* ``t = log(|z| / r) / log(1 / r)`` in ``(0, 1)``, which
is invariant under the power maps ``z -> z**d`` and never underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError, OutsideCollarError

#: Horocyclic coordinate of the boundary of the standard cusp collar (length 2).
CUSP_COLLAR_BOUNDARY = math.log(2.0)


@dataclass(frozen=True)
class StdAnnulus:
    """Round annulus ``{r < |z| < 1}`` of conformal modulus ``log(1/r) / (2 pi)``."""

    modulus: float

    def __post_init__(self):
        mu = float(self.modulus)
        if not (mu > 0.0 and math.isfinite(mu)):
            raise DomainError(f"annulus modulus must be positive and finite, got {self.modulus!r}")
        object.__setattr__(self, "modulus", mu)

    @property
    def inner_radius(self) -> float:
        return math.exp(-2.0 * math.pi * self.modulus)

    @property
    def log_inner_radius(self) -> float:
        return -2.0 * math.pi * self.modulus

    @property
    def core_radius(self) -> float:
        return math.exp(-math.pi * self.modulus)

    @property
    def core_length(self) -> float:
        return annulus_core_length(self)

    def relative_height(self, s: float) -> float:
        """Map a radius ``s`` in ``(r, 1)`` to ``t`` in ``(0, 1)``; the core is ``t = 1/2``."""
        s = float(s)
        if not (s > 0.0):
            raise DomainError(f"radius must be positive, got {s}")
        t = 1.0 + math.log(s) / (2.0 * math.pi * self.modulus)
        if not (0.0 < t < 1.0):
            raise DomainError(f"radius {s} outside annulus ({self.inner_radius}, 1)")
        return t

    def density(self, z):
        """Hyperbolic density of the round annulus at ``z`` (array-friendly)."""
        z = np.asarray(z, dtype=np.complex128)
        h = 2.0 * np.pi * self.modulus
        rho = np.abs(z)
        x = np.log(rho) + h
        return (np.pi / h) / (rho * np.sin(np.pi * x / h))


@dataclass(frozen=True)
class StdPuncturedDisc:
    """The model punctured disc ``{0 < |z| < 1}`` with its cusp metric."""

    def density(self, z):
        z = np.asarray(z, dtype=np.complex128)
        rho = np.abs(z)
        return 1.0 / (rho * np.log(1.0 / rho))

    @staticmethod
    def horocycle_coordinate(s: float) -> float:
        """Cusp coordinate ``p`` of the circle ``|z| = s``, whose length is ``e**p``."""
        s = float(s)
        if not (0.0 < s < 1.0):
            raise DomainError(f"radius {s} outside the punctured disc")
        return math.log(2.0 * math.pi / math.log(1.0 / s))


@dataclass(frozen=True)
class CollarSpec:
    kind: Literal["geodesic-collar", "cusp-collar"]
    width: float
    core_length: float | None = None

    @classmethod
    def geodesic(cls, core_length: float) -> "CollarSpec":
        return cls("geodesic-collar", collar_width(core_length), float(core_length))

    @classmethod
    def cusp(cls) -> "CollarSpec":
        # The cusp collar has infinite depth; width is measured to the puncture.
        return cls("cusp-collar", math.inf, None)

    @property
    def boundary_horocycle_length(self) -> float:
        if self.kind != "cusp-collar":
            raise DomainError("only cusp collars have a boundary horocycle")
        return 2.0


def _check_disc(z, name="point"):
    a = np.abs(np.asarray(z, dtype=np.complex128))
    if np.any(~(a < 1.0)):
        raise DomainError(f"{name} must lie in the open unit disc, got |{name}| = {np.max(a)}")


def hyp_dist(z, w):
    """Poincare distance in the unit disc; broadcasts over arrays."""
    _check_disc(z, "z")
    _check_disc(w, "w")
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    ratio = np.abs(z - w) / np.abs(1.0 - np.conj(w) * z)
    d = 2.0 * np.arctanh(np.minimum(ratio, 1.0))
    return float(d) if d.ndim == 0 else d


def hyp_distortion(g, z):
    """Norm of the hyperbolic derivative of the disc self-map ``g`` at ``z``.

    Equals ``|g'(z)| (1 - |z|^2) / (1 - |g(z)|^2)`` and is at most 1 by
    Schwarz-Pick.  ``g`` needs ``eval`` and ``derivative`` methods.
    """
    _check_disc(z, "z")
    z = np.asarray(z, dtype=np.complex128)
    gz = np.asarray(g.eval(z))
    dg = np.asarray(g.derivative(z))
    out = np.abs(dg) * (1.0 - np.abs(z) ** 2) / (1.0 - np.abs(gz) ** 2)
    return float(out) if out.ndim == 0 else out


def collar_width(core_length: float) -> float:
    """Width of the standard collar about a closed geodesic of the given length.

    ``0.5 * log((cosh(l/2) + 1) / (cosh(l/2) - 1))`` rewritten as
    ``-log(tanh(l/4))`` to stay accurate for short geodesics.
    """
    ell = float(core_length)
    if not (ell > 0.0):
        raise DomainError(f"core length must be positive, got {core_length!r}")
    return -math.log(math.tanh(ell / 4.0))


def annulus_core_length(a: StdAnnulus) -> float:
    return math.pi / a.modulus


def collar_inj_lower_bound(d: float) -> float:
    """Certified lower bound ``exp(-d) / 2`` on the injectivity radius at depth ``d``."""
    d = float(d)
    if d < 0.0:
        raise DomainError(f"distance to the collar boundary must be nonnegative, got {d}")
    return 0.5 * math.exp(-d)


def core_distance_from_height(t: float) -> float:
    """Distance to the core geodesic of a point at relative height ``t``."""
    if not (0.0 < t < 1.0):
        raise DomainError(f"relative height must lie in (0, 1), got {t}")
    return abs(math.log(math.tan(0.5 * math.pi * t)))


def annulus_core_distance(a: StdAnnulus, s: float) -> float:
    return core_distance_from_height(a.relative_height(s))


def injectivity_from_height(modulus: float, t: float) -> float:
    """Injectivity radius in the round annulus of the given modulus at height ``t``.

    The cyclic deck group acts on the universal cover by hyperbolic
    translations of length ``l = pi / modulus``; a point at distance ``d``
    from the axis is displaced by ``delta`` with
    ``sinh(delta / 2) = sinh(l / 2) cosh(d)``, and the injectivity radius is
    ``delta / 2``.
    """
    ell = math.pi / modulus
    d = core_distance_from_height(t)
    half = 0.5 * ell
    if half > 700.0:
        # sinh overflows; asinh(x) = log(2x) to double precision here.
        return half + math.log(math.cosh(d)) if d < 700.0 else half + d - math.log(2.0)
    return math.asinh(math.sinh(half) * math.cosh(d))


def annulus_injectivity(a: StdAnnulus, s: float) -> float:
    """Injectivity radius of the round annulus at any point of ``|z| = s``."""
    return injectivity_from_height(a.modulus, a.relative_height(s))


def collar_depth(a: StdAnnulus, s: float) -> float:
    """Distance from ``|z| = s`` to the boundary of the standard collar, negative outside."""
    return collar_width(a.core_length) - annulus_core_distance(a, s)


def buser_injectivity(core_length: float, depth: float) -> float:
    """Injectivity radius from the collar identity ``sinh(inj) = L cosh d - sinh d``.

    ``L = cosh(core_length / 2)``, ``d`` the distance to the collar boundary.
    """
    L = math.cosh(0.5 * core_length)
    return math.asinh(L * math.cosh(depth) - math.sinh(depth))


def cusp_injectivity(p_coord: float) -> float:
    """Injectivity radius ``exp(p) / 2`` at horocyclic coordinate ``p`` of the standard cusp.

    The exact value in ``H / <z -> z + 1>`` is ``asinh(exp(p) / 2)``, so this
    is an upper approximation, tight as ``p -> -inf``.
    """
    p = float(p_coord)
    if p > CUSP_COLLAR_BOUNDARY + 1e-15:
        raise OutsideCollarError(
            f"cusp coordinate {p} lies outside the standard collar (p <= log 2)"
        )
    return 0.5 * math.exp(p)
