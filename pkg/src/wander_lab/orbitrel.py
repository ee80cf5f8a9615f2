"""Grand orbits in the disc model and the discreteness detector.

Grand orbits are sampled fiberwise: for a base point ``z`` and depth ``k`` the
sample is ``G_0^k``'s full fiber through ``z``, which contains every ``w`` with
``G_0^j(w) = G_0^j(z)`` for some ``j <= k``.

The detector is two-tier.  Sequences whose tail is known symbolically get an
exact verdict; only sequences without usable tail information fall back to
the min-gap heuristic, whose verdicts are flagged ``structural=False``.
"""

from __future__ import annotations

import cmath
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, NonConvergentError
from .innerseq import BlaschkeMap, MapSequence
from .powertower import CoveringTower, TowerPoint, indiscreteness_witness

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-10
REFERENCE_RADIUS = 0.9
DEFAULT_CAP = 1_000_000
DEFAULT_SCHEDULE = (4, 6, 8, 10)
DEFAULT_FLOOR = 1e-6
DEGREE_CAP = 64
_RESIDUAL_TOL = 1e-9


# ---------------------------------------------------------------------------
# preimages
# ---------------------------------------------------------------------------


def _fiber_polynomials(g: BlaschkeMap, ws: np.ndarray) -> np.ndarray:
    """Coefficient rows (highest first) of ``coef P(z) - w Q(z)`` for each ``w``."""
    P = np.poly(g.zeros) * g.coef
    Q = np.array([1.0 + 0j])
    for a in g.zeros:
        Q = np.polymul(Q, [-np.conj(a), 1.0])
    Q = np.concatenate([np.zeros(P.size - Q.size, dtype=complex), Q])
    return P[None, :] - ws[:, None] * Q[None, :]


def _preimages_many(g: BlaschkeMap, ws) -> np.ndarray:
    """Array of shape ``(len(ws), d)`` with every preimage of every ``w``."""
    ws = np.asarray(ws, dtype=np.complex128).reshape(-1)
    if np.any(~(np.abs(ws) < 1.0)):
        raise DomainError("preimages need |w| < 1")
    d = g.degree
    if d > DEGREE_CAP:
        raise DomainError(f"degree {d} exceeds the root-finding cap {DEGREE_CAP}")
    if ws.size == 0:
        return np.zeros((0, d), dtype=np.complex128)
    coeffs = _fiber_polynomials(g, ws)
    coeffs = coeffs[:, 1:] / coeffs[:, :1]
    if d == 1:
        roots = -coeffs
    else:
        comp = np.zeros((ws.size, d, d), dtype=np.complex128)
        comp[:, 0, :] = -coeffs
        idx = np.arange(d - 1)
        comp[:, idx + 1, idx] = 1.0
        roots = np.linalg.eigvals(comp)
    # one Newton step against B(z) - w
    target = np.repeat(ws[:, None], d, axis=1)
    flat = roots.reshape(-1)
    inside = np.abs(flat) < 1.0
    val = np.full(flat.shape, np.nan, dtype=np.complex128)
    der = np.full(flat.shape, np.nan, dtype=np.complex128)
    val[inside] = g._raw(flat[inside])
    der[inside] = np.asarray(g.derivative(flat[inside]))
    step = np.zeros_like(flat)
    ok = inside & (np.abs(der) > 1e-14)
    step[ok] = (val[ok] - target.reshape(-1)[ok]) / der[ok]
    polished = np.where(inside, flat - step, flat)
    polished = np.where(np.abs(polished) < 1.0, polished, flat)
    return polished.reshape(ws.size, d)


def _checked(g: BlaschkeMap, ws: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """Keep roots inside the disc and check the fiber equation on them."""
    target = np.repeat(ws[:, None], roots.shape[1], axis=1)
    mask = np.abs(roots) < 1.0
    if g.is_inner and not np.all(mask):
        bad = int(np.count_nonzero(~mask))
        raise NonConvergentError(f"{bad} preimage(s) of an inner function landed off the disc")
    pts = roots[mask]
    res = np.abs(np.asarray(g._raw(pts)) - target[mask])
    if res.size and float(np.max(res)) >= _RESIDUAL_TOL:
        der = np.abs(np.asarray(g.derivative(pts)))
        raise NonConvergentError(
            f"preimage residual {float(np.max(res)):.3g} >= {_RESIDUAL_TOL}; "
            f"min |B'| at the roots is {float(np.min(der)):.3g} (near-critical fiber)"
        )
    return pts


def preimages(g: BlaschkeMap, w: complex) -> list[complex]:
    """All solutions of ``g(z) = w`` in the disc, with multiplicity.

    For an inner ``g`` there are exactly ``degree`` of them.  Maps with a
    ``scale`` below one are not proper and may have fewer preimages in the disc.
    """
    ws = np.array([complex(w)])
    roots = _preimages_many(g, ws)
    pts = _checked(g, ws, roots)
    return sorted((complex(z) for z in pts), key=lambda z: (z.real, z.imag))


# ---------------------------------------------------------------------------
# grand-orbit samples
# ---------------------------------------------------------------------------


def _sort_points(pts: np.ndarray) -> np.ndarray:
    order = np.lexsort((pts.imag, pts.real))
    return pts[order]


def dedupe(points, tol: float = DEDUP_TOL) -> np.ndarray:
    """Drop points within ``tol`` (Euclidean) of an earlier one in sorted order."""
    pts = _sort_points(np.asarray(points, dtype=np.complex128).reshape(-1))
    kept: list[complex] = []
    start = 0
    for z in pts:
        while start < len(kept) and kept[start].real < z.real - tol:
            start += 1
        if all(abs(z - kept[i]) > tol for i in range(start, len(kept))):
            kept.append(complex(z))
    return np.array(kept, dtype=np.complex128)


def push_forward(seq: MapSequence, z, n: int, m: int):
    """``G_n^m(z) = g_{m-1}(... g_n(z))`` by sequential evaluation."""
    out = np.asarray(z, dtype=np.complex128)
    for k in range(n, m):
        out = np.asarray(seq[k]._raw(out))
    return out


def min_gap(points, radius: float = REFERENCE_RADIUS) -> float:
    """Smallest hyperbolic distance between points inside ``D_radius`` (inf if < 2)."""
    pts = np.asarray(points, dtype=np.complex128).reshape(-1)
    pts = pts[np.abs(pts) < radius]
    return float(_kernels.min_hyp_gap(pts))


@dataclass
class GrandOrbitSample:
    base: complex
    depth: int
    points: np.ndarray
    min_gap: float
    truncated: bool = False
    reason: str = ""

    @property
    def count(self) -> int:
        return int(self.points.size)

    def to_dict(self) -> dict:
        gap = self.min_gap if math.isfinite(self.min_gap) else None
        return {
            "base": [self.base.real, self.base.imag],
            "depth": self.depth,
            "count": self.count,
            "min_gap": gap,
            "truncated": self.truncated,
            "reason": self.reason,
        }


def grand_orbit_sample(
    seq: MapSequence,
    base: complex,
    depth: int,
    cap: int = DEFAULT_CAP,
    radius: float = REFERENCE_RADIUS,
) -> GrandOrbitSample:
    """Level-0 fiber of ``G_0^depth`` through ``base``, deduplicated at 1e-10."""
    base = complex(base)
    if not abs(base) < 1.0:
        raise DomainError(f"base point must lie in the disc, got |base| = {abs(base)}")
    if depth < 0:
        raise DomainError("depth must be nonnegative")
    truncated, reason = False, ""
    k = seq.available(depth)
    if k < depth:
        truncated, reason = True, f"sequence has only {k} terms"

    if base != 0 and all(seq[j].is_monomial for j in range(k)):
        pts = _monomial_fiber(seq, base, k, cap)
        kk = k
        while pts is None:
            truncated, reason = True, f"point count would exceed cap {cap}"
            kk -= 1
            pts = _monomial_fiber(seq, base, kk, cap)
        pts = _anchor(pts, base)
        return GrandOrbitSample(base, depth, pts, min_gap(pts, radius), truncated, reason)

    forward = [np.array([base])]
    for j in range(k):
        forward.append(np.asarray(seq[j]._raw(forward[-1])).reshape(1))
    level = forward[k]
    for j in range(k - 1, -1, -1):
        g = seq[j]
        if level.size * g.degree > cap:
            truncated, reason = True, f"point count would exceed cap {cap} at level {j}"
            level = _partial_pullback(seq, forward, k - 1, cap)
            break
        pts = _checked(g, level, _preimages_many(g, level))
        level = dedupe(pts)
    pts = _anchor(level, base)
    return GrandOrbitSample(base, depth, pts, min_gap(pts, radius), truncated, reason)


def _monomial_fiber(seq, base, k, cap):
    """Exact fiber for chains of ``e^{i a} z**d``: angles only, the radius is fixed.

    Forward images ``base**D`` underflow long before the fiber gets large, so
    the chain is followed in the angle coordinate instead.
    """
    angles = [cmath.phase(base)]
    for j in range(k):
        g = seq[j]
        angles.append(g.degree * angles[-1] + cmath.phase(g.rotation))
    level = np.array([angles[k]])
    for j in range(k - 1, -1, -1):
        d = seq[j].degree
        if level.size * d > cap:
            return None
        shift = cmath.phase(seq[j].rotation)
        level = ((level[:, None] - shift + 2.0 * np.pi * np.arange(d)[None, :]) / d).reshape(-1)
    return dedupe(abs(base) * np.exp(1j * level))


def _partial_pullback(seq, forward, stop, cap):
    """Deepest full fiber through the base that stays under ``cap`` points."""
    for k in range(stop, -1, -1):
        level = forward[k]
        ok = True
        for j in range(k - 1, -1, -1):
            if level.size * seq[j].degree > cap:
                ok = False
                break
            level = dedupe(_checked(seq[j], level, _preimages_many(seq[j], level)))
        if ok:
            return level
    return forward[0]


def _anchor(points: np.ndarray, base: complex) -> np.ndarray:
    """Replace the computed copy of ``base`` by ``base`` itself."""
    if points.size == 0:
        return np.array([base])
    i = int(np.argmin(np.abs(points - base)))
    if abs(points[i] - base) <= 1e-8:
        points = points.copy()
        points[i] = base
    else:
        points = np.concatenate([points, [base]])
    return _sort_points(points)


# ---------------------------------------------------------------------------
# discreteness
# ---------------------------------------------------------------------------


class Relation(str, enum.Enum):
    DISCRETE = "Discrete"
    INDISCRETE = "Indiscrete"
    UNDETERMINED = "Undetermined"

    def __str__(self):
        return self.value


@dataclass
class RelationVerdict:
    verdict: Relation
    structural: bool
    reason: str
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "structural": self.structural,
            "reason": self.reason,
            "evidence": self.evidence,
        }


def _structural(seq: MapSequence) -> RelationVerdict | None:
    meta = seq.tail_meta
    if meta is None:
        return None
    if meta.power_tail and meta.degree_ge2_io:
        return RelationVerdict(
            Relation.INDISCRETE, True, "power-map tail with degree >= 2 infinitely often: D_n -> inf"
        )
    if meta.eventually_isometric or (meta.power_tail and meta.degree_ge2_io is False):
        return RelationVerdict(
            Relation.DISCRETE, True, "eventually isometric tail: injective on all forward images"
        )
    if meta.lambda_floor is not None and meta.lambda_floor > 0.0:
        return RelationVerdict(
            Relation.DISCRETE,
            True,
            f"hyperbolic distortion bounded below by {meta.lambda_floor:.6g}",
        )
    return None


def _tower_verdict(tower: CoveringTower, schedule, base) -> RelationVerdict:
    if base is None:
        base = TowerPoint(0, -math.pi * float(tower.mu0), 0.0) if tower.mu0 else TowerPoint(0, -1.0, 0.0)
    gaps = [indiscreteness_witness(tower, base, k) for k in schedule]
    evidence = {"depths": list(schedule), "angular_gaps": gaps}
    if tower.degrees.ge2_infinitely_often:
        return RelationVerdict(
            Relation.INDISCRETE, True, "degree >= 2 infinitely often: D_n -> inf", evidence
        )
    return RelationVerdict(Relation.DISCRETE, True, "eventually degree 1: isometric tower", evidence)


def _heuristic(trajectory: list[float], depths: list[int], floor: float) -> tuple[Relation, str]:
    finite = [g for g in trajectory if math.isfinite(g)]
    if len(finite) < 2:
        if not finite and trajectory:
            # no two points in the reference disc at any depth
            return Relation.DISCRETE, "fibers never accumulate in the reference disc"
        return Relation.UNDETERMINED, "too few finite gaps"
    if finite[-1] < floor:
        return Relation.INDISCRETE, f"min_gap {finite[-1]:.3g} fell below floor {floor:.3g}"
    pairs = list(zip(trajectory, trajectory[1:], depths, depths[1:]))
    if all(
        math.isfinite(a) and math.isfinite(b) and b <= a * 2.0 ** (-(j2 - j1) / 2.0)
        for a, b, j1, j2 in pairs
    ):
        return Relation.INDISCRETE, "min_gap follows a geometric decay envelope"
    if min(finite) >= floor and finite[-1] >= 0.5 * finite[0]:
        return Relation.DISCRETE, "min_gap stabilizes above the floor"
    return Relation.UNDETERMINED, "min_gap trajectory is inconclusive"


def discreteness_detect(
    seq,
    base: complex | TowerPoint | None = None,
    depth_schedule: Sequence[int] = DEFAULT_SCHEDULE,
    floor: float = DEFAULT_FLOOR,
    cap: int = DEFAULT_CAP,
    structural: bool = True,
) -> RelationVerdict:
    """Classify the grand-orbit relation of ``seq`` (a map sequence or a tower).

    Structural verdicts from tail metadata take precedence; ``structural=False``
    forces the heuristic path (for testing the heuristic on known cases).
    """
    schedule = [int(j) for j in depth_schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise DomainError("depth_schedule must be strictly increasing")
    if isinstance(seq, CoveringTower):
        return _tower_verdict(seq, schedule, base)

    if structural:
        verdict = _structural(seq)
        if verdict is not None:
            return verdict

    base = 0.5 if base is None else complex(base)
    trajectory: list[float] = []
    depths: list[int] = []
    for j in schedule:
        if seq.available(j) < j:
            return RelationVerdict(
                Relation.UNDETERMINED,
                False,
                f"depth {j} exceeds the explicit horizon {seq.length}",
                {"depths": depths, "min_gaps": _jsonable(trajectory), "floor": floor},
            )
        sample = grand_orbit_sample(seq, base, j, cap=cap)
        if sample.truncated:
            break
        trajectory.append(sample.min_gap)
        depths.append(j)
    verdict, reason = _heuristic(trajectory, depths, floor)
    evidence = {"depths": depths, "min_gaps": _jsonable(trajectory), "floor": floor}
    return RelationVerdict(verdict, False, reason, evidence)


def _jsonable(values):
    return [v if math.isfinite(v) else None for v in values]
