"""Finite Blaschke products and rule-generated sequences of them.

A :class:`BlaschkeMap` is ``scale * rotation * prod (z - a) / (1 - conj(a) z)``.
With ``scale == 1`` it is an inner function; ``scale < 1`` gives the
contracting self-maps (``0.5 * z`` and friends) used as linear test cases.

A :class:`MapSequence` generates ``g_0, g_1, ...`` from a rule and carries
``tail_meta``, a symbolic description of the tail that finite prefixes cannot
reveal (divergence of ``sum(1 - lambda_n)``, eventual isometry, a positive
lower bound on ``lambda_n``).  Classification reads the tail metadata; finite
explicit lists get ``Undetermined`` plus partial-sum evidence.
"""

from __future__ import annotations

import enum
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import DegenerateError, DomainError

log = logging.getLogger(__name__)

ZERO_MARGIN = 1e-12
DEFAULT_HORIZON = 10_000
_ORIGIN_TOL = 1e-15


def _check_open_disc(z):
    a = np.abs(np.asarray(z, dtype=np.complex128))
    if np.any(~(a < 1.0)):
        raise DomainError(f"point must lie in the open unit disc, got |z| = {np.max(a)}")


class BlaschkeMap:
    """Finite Blaschke product, optionally scaled into a strict self-map."""

    __slots__ = ("zeros", "rotation", "scale", "_count", "_lam")

    def __init__(self, zeros: Sequence[complex], rotation: complex = 1.0, scale: float = 1.0):
        zs = np.array(list(zeros), dtype=np.complex128).reshape(-1)
        if zs.size == 0:
            raise DomainError("a Blaschke map needs at least one zero (degree >= 1)")
        for i, a in enumerate(zs):
            if not (abs(a) < 1.0 - ZERO_MARGIN):
                raise DomainError(f"zeros[{i}]: modulus {abs(a):.6g} must be < 1 - {ZERO_MARGIN}")
        rot = complex(rotation)
        if abs(abs(rot) - 1.0) > 1e-12:
            raise DomainError(f"rotation must be unimodular, got |rotation| = {abs(rot)}")
        rot /= abs(rot)
        scale = float(scale)
        if not (0.0 < scale <= 1.0):
            raise DomainError(f"scale must lie in (0, 1], got {scale}")
        zs.setflags(write=False)
        self.zeros = zs
        self.rotation = rot
        self.scale = scale
        self._count = zs.size
        self._lam = None

    # constructors -----------------------------------------------------------

    @classmethod
    def identity(cls) -> "BlaschkeMap":
        return cls([0.0])

    @classmethod
    def rotation_map(cls, theta: float) -> "BlaschkeMap":
        return cls([0.0], rotation=complex(math.cos(theta), math.sin(theta)))

    @classmethod
    def linear(cls, c: complex) -> "BlaschkeMap":
        """The map ``z -> c z`` for ``0 < |c| <= 1``."""
        c = complex(c)
        return cls([0.0], rotation=c / abs(c), scale=abs(c))

    @classmethod
    def koenigs_pair(cls, a: float, scale: float = 1.0) -> "BlaschkeMap":
        """``scale * z (z + a) / (1 + a z)``, the degree-2 map with derivative ``scale * a`` at 0."""
        return cls([0.0, -a], scale=scale)

    # basic properties -------------------------------------------------------

    @property
    def degree(self) -> int:
        return self._count

    @property
    def coef(self) -> complex:
        return self.rotation * self.scale

    @property
    def is_inner(self) -> bool:
        return self.scale == 1.0

    @property
    def fixes_origin(self) -> bool:
        return bool(np.any(np.abs(self.zeros) <= _ORIGIN_TOL))

    @property
    def is_rotation(self) -> bool:
        return self._count == 1 and self.fixes_origin and self.is_inner

    @property
    def is_monomial(self) -> bool:
        """True for unimodular multiples of ``z**d``."""
        return self.is_inner and bool(np.all(np.abs(self.zeros) <= _ORIGIN_TOL))

    def derivative_at_zero(self) -> complex:
        return complex(self.derivative(0.0))

    @property
    def lam(self) -> float:
        """``|g'(0)|`` for an origin-fixing map."""
        if self._lam is None:
            if not self.fixes_origin:
                raise DomainError("lambda is defined for maps fixing the origin")
            self._lam = abs(self.derivative_at_zero())
        return self._lam

    # evaluation -------------------------------------------------------------

    def _raw(self, z):
        z = np.asarray(z, dtype=np.complex128)
        out = _kernels.blaschke_eval(self.zeros, self._count, self.coef, z)
        return out if out.ndim else complex(out)

    def eval(self, z):
        _check_open_disc(z)
        return self._raw(z)

    __call__ = eval

    def on_circle(self, theta):
        """Values at ``exp(i theta)``; modulus ``scale`` there."""
        return self._raw(np.exp(1j * np.asarray(theta, dtype=float)))

    def derivative(self, z):
        _check_open_disc(z)
        z = np.asarray(z, dtype=np.complex128)
        out = _kernels.blaschke_deriv(self.zeros, self._count, self.coef, z)
        return out if out.ndim else complex(out)

    def critical_points(self) -> np.ndarray:
        """Critical points inside the disc (with multiplicity)."""
        if self._count < 2:
            return np.zeros(0, dtype=np.complex128)
        P = np.poly(self.zeros)
        Q = np.array([1.0 + 0j])
        for a in self.zeros:
            Q = np.polymul(Q, [-np.conj(a), 1.0])
        num = np.polysub(np.polymul(np.polyder(P), Q), np.polymul(P, np.polyder(Q)))
        num = np.trim_zeros(num, "f")
        if num.size <= 1:
            return np.zeros(0, dtype=np.complex128)
        roots = np.roots(num)
        roots = roots[np.abs(roots) < 1.0 - 1e-9]
        return np.sort_complex(roots)

    def critical_values(self) -> np.ndarray:
        c = self.critical_points()
        return np.asarray(self._raw(c)) if c.size else c

    # plumbing ---------------------------------------------------------------

    def nonzero_zeros(self) -> np.ndarray:
        """Zeros other than a single zero at the origin."""
        mask = np.abs(self.zeros) > _ORIGIN_TOL
        if np.count_nonzero(~mask) != 1:
            raise DegenerateError(
                "origin must be a simple zero (g(0) = 0, g'(0) != 0) for linearization"
            )
        return self.zeros[mask]

    def to_dict(self) -> dict:
        return {
            "zeros": [[float(a.real), float(a.imag)] for a in self.zeros],
            "rotation": [float(self.rotation.real), float(self.rotation.imag)],
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlaschkeMap":
        zeros = [complex(*pair) for pair in d["zeros"]]
        rot = complex(*d.get("rotation", [1.0, 0.0]))
        return cls(zeros, rotation=rot, scale=d.get("scale", 1.0))

    def __eq__(self, other):
        if not isinstance(other, BlaschkeMap):
            return NotImplemented
        return (
            np.array_equal(self.zeros, other.zeros)
            and self.rotation == other.rotation
            and self.scale == other.scale
        )

    def __hash__(self):
        return hash((self.zeros.tobytes(), self.rotation, self.scale))

    def __repr__(self):
        zs = ", ".join(f"{a:.6g}" for a in self.zeros)
        extra = "" if self.scale == 1.0 else f", scale={self.scale:.6g}"
        return f"BlaschkeMap([{zs}], rotation={self.rotation:.6g}{extra})"


def normalize_rotation(g: BlaschkeMap) -> BlaschkeMap:
    """Post-compose an origin-fixing map with the rotation making ``g'(0) > 0``."""
    if not g.fixes_origin:
        raise DomainError("normalize_rotation needs a map fixing the origin")
    d0 = g.derivative_at_zero()
    if abs(d0) == 0.0:
        raise DegenerateError("origin is a critical point: g'(0) = 0")
    unit = d0 / abs(d0)
    return BlaschkeMap(g.zeros, rotation=g.rotation / unit, scale=g.scale)


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailMeta:
    """What is known about the infinite tail of a sequence.

    ``None`` means unknown.  ``lambda_floor`` is a positive lower bound on every
    ``lambda_n`` when one is known; ``power_tail`` marks tails made of
    unimodular monomials ``e^{i a} z**d`` with ``degree_ge2_io`` recording
    whether ``d >= 2`` infinitely often.
    """

    sum_diverges: bool | None = None
    eventually_isometric: bool | None = None
    lambda_floor: float | None = None
    power_tail: bool = False
    degree_ge2_io: bool | None = None
    isometric_from: int | None = None


class MapSequence:
    """A deterministic sequence of Blaschke maps with symbolic tail metadata.

    Build one through the classmethods (:meth:`constant`, :meth:`periodic`,
    :meth:`explicit`, :meth:`parametric`, :meth:`rotation_tail`).  Origin-fixing
    terms are rotation-normalized on materialization unless ``normalize`` is
    false.  Materialized terms are memoized under a lock.
    """

    def __init__(
        self,
        rule: str,
        generator: Callable[[int], BlaschkeMap],
        tail_meta: TailMeta | None,
        description: dict,
        length: int | None = None,
        lambda_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        normalize: bool = True,
        horizon: int = DEFAULT_HORIZON,
    ):
        self.rule = rule
        self._generator = generator
        self.tail_meta = tail_meta
        self.description = description
        self.length = length
        self.lambda_fn = lambda_fn
        self.normalize = normalize
        self.horizon = int(horizon if length is None else min(horizon, length))
        self._cache: list[BlaschkeMap] = []
        self._lock = threading.Lock()
        self._noted = False

    # factories --------------------------------------------------------------

    @classmethod
    def periodic(cls, head: Sequence[BlaschkeMap], period: Sequence[BlaschkeMap], **kw):
        head = list(head)
        period = list(period)
        if not period:
            raise DomainError("periodic rule needs a non-empty period")

        def gen(n):
            if n < len(head):
                return head[n]
            return period[(n - len(head)) % len(period)]

        meta = _meta_from_tail(period, start=len(head), head=head)
        desc = {
            "rule": "periodic",
            "head": [g.to_dict() for g in head],
            "period": [g.to_dict() for g in period],
        }
        return cls("periodic", gen, meta, desc, **kw)

    @classmethod
    def constant(cls, g: BlaschkeMap, **kw):
        seq = cls.periodic([], [g], **kw)
        seq.rule = "constant"
        seq.description = {"rule": "constant", "map": g.to_dict()}
        return seq

    @classmethod
    def explicit(cls, maps: Sequence[BlaschkeMap], **kw):
        maps = list(maps)
        if not maps:
            raise DomainError("explicit rule needs at least one map")

        def gen(n):
            return maps[n]

        desc = {"rule": "explicit", "maps": [g.to_dict() for g in maps]}
        return cls("explicit", gen, None, desc, length=len(maps), **kw)

    @classmethod
    def rotation_tail(cls, head: Sequence[BlaschkeMap], angle: float = 0.0, **kw):
        head = list(head)
        rot = BlaschkeMap.rotation_map(angle)

        def gen(n):
            return head[n] if n < len(head) else rot

        meta = _meta_from_tail([rot], start=len(head), head=head)
        desc = {"rule": "rotation_tail", "head": [g.to_dict() for g in head], "angle": angle}
        return cls("rotation_tail", gen, meta, desc, **kw)

    @classmethod
    def parametric(cls, c: float = 1.0, alpha: float = 2.0, family: str = "blaschke2", **kw):
        """``lambda_n = 1 - c / (n + 2)**alpha`` realized by degree-2 or linear maps.

        ``family="blaschke2"`` gives ``z (z + lambda_n) / (1 + lambda_n z)``;
        ``family="linear"`` gives ``lambda_n z``.
        """
        c = float(c)
        alpha = float(alpha)
        if not (c > 0.0 and alpha > 0.0):
            raise DomainError("parametric family needs c > 0 and alpha > 0")
        if not (c < 2.0**alpha):
            raise DomainError("parametric family needs c < 2**alpha so that lambda_0 > 0")
        if family not in ("blaschke2", "linear"):
            raise DomainError(f"unknown parametric family {family!r}")

        def lam(n):
            return 1.0 - c / (np.asarray(n, dtype=float) + 2.0) ** alpha

        def gen(n):
            ln = float(lam(n))
            if family == "linear":
                return BlaschkeMap.linear(ln)
            return BlaschkeMap.koenigs_pair(ln)

        meta = TailMeta(
            sum_diverges=alpha <= 1.0,
            eventually_isometric=False,
            lambda_floor=float(lam(0)),
        )
        desc = {"rule": "parametric", "family": family, "c": c, "alpha": alpha}
        seq = cls("parametric", gen, meta, desc, lambda_fn=lam, **kw)
        seq._param = (c, alpha)
        return seq

    @classmethod
    def from_description(cls, desc: dict, **kw) -> "MapSequence":
        rule = desc.get("rule")
        maps = lambda key: [BlaschkeMap.from_dict(d) for d in desc.get(key, [])]  # noqa: E731
        if rule == "constant":
            return cls.constant(BlaschkeMap.from_dict(desc["map"]), **kw)
        if rule == "periodic":
            return cls.periodic(maps("head"), maps("period"), **kw)
        if rule == "explicit":
            return cls.explicit(maps("maps"), **kw)
        if rule == "rotation_tail":
            return cls.rotation_tail(maps("head"), float(desc.get("angle", 0.0)), **kw)
        if rule == "parametric":
            return cls.parametric(
                desc.get("c", 1.0), desc.get("alpha", 2.0), desc.get("family", "blaschke2"), **kw
            )
        raise DomainError(f"unknown sequence rule {rule!r}")

    # materialization ----------------------------------------------------------

    def __getitem__(self, n: int) -> BlaschkeMap:
        n = int(n)
        if n < 0:
            raise IndexError(n)
        if self.length is not None and n >= self.length:
            raise IndexError(f"explicit sequence has only {self.length} terms")
        if n < len(self._cache):
            return self._cache[n]
        with self._lock:
            while len(self._cache) <= n:
                self._cache.append(self._materialize(len(self._cache)))
        return self._cache[n]

    def _materialize(self, n):
        g = self._generator(n)
        if self.normalize and g.fixes_origin:
            d0 = g.derivative_at_zero()
            if abs(d0) > 0.0 and abs(d0 / abs(d0) - 1.0) > 1e-15:
                if not self._noted:
                    log.info("rotation-normalizing %s sequence (first at n=%d)", self.rule, n)
                    self._noted = True
                g = normalize_rotation(g)
        return g

    def maps(self, n: int, m: int) -> list[BlaschkeMap]:
        return [self[k] for k in range(n, m)]

    def available(self, m: int) -> int:
        """Largest end index ``<= m`` that can be materialized."""
        return m if self.length is None else min(m, self.length)

    def lambdas(self, n: int, m: int) -> np.ndarray:
        out = np.empty(max(m - n, 0))
        for i, k in enumerate(range(n, m)):
            out[i] = self[k].lam
        return out

    def table(self, n: int, m: int):
        """Pack maps ``n..m-1`` as ``(zeros, counts, coefs)`` kernel arrays."""
        gs = self.maps(n, m)
        width = max((g.degree for g in gs), default=1)
        zeros = np.zeros((len(gs), width), dtype=np.complex128)
        counts = np.empty(len(gs), dtype=np.int64)
        coefs = np.empty(len(gs), dtype=np.complex128)
        for i, g in enumerate(gs):
            zeros[i, : g.degree] = g.zeros
            counts[i] = g.degree
            coefs[i] = g.coef
        return zeros, counts, coefs

    def koenigs_table(self, n: int, m: int):
        """Pack maps ``n..m-1`` as ``(nonzero zeros, counts, units, lambdas)``."""
        gs = self.maps(n, m)
        rows = [g.nonzero_zeros() for g in gs]
        width = max((r.size for r in rows), default=1) or 1
        zeros = np.zeros((len(gs), width), dtype=np.complex128)
        counts = np.empty(len(gs), dtype=np.int64)
        units = np.empty(len(gs), dtype=np.complex128)
        lams = np.empty(len(gs), dtype=np.float64)
        for i, (g, r) in enumerate(zip(gs, rows)):
            zeros[i, : r.size] = r
            counts[i] = r.size
            d0 = g.derivative_at_zero()
            if d0 == 0:
                raise DegenerateError(f"g_{n + i}'(0) = 0")
            lams[i] = abs(d0)
            units[i] = d0 / abs(d0)
        return zeros, counts, units, lams

    def to_description(self) -> dict:
        return dict(self.description)

    def __repr__(self):
        return f"MapSequence({self.description!r})"


def _meta_from_tail(period: Sequence[BlaschkeMap], start: int, head=()) -> TailMeta:
    if not all(g.fixes_origin for g in period):
        return TailMeta(power_tail=all(g.is_monomial for g in period))
    lams = [g.lam for g in period]
    # the floor bounds every term, so the head counts too
    head_lams = [g.lam if g.fixes_origin else 0.0 for g in head]
    isometric = all(g.is_rotation for g in period)
    power = all(g.is_monomial for g in period)
    floor = min(lams + head_lams)
    floor = floor if floor > 0.0 else None
    return TailMeta(
        sum_diverges=not isometric,
        eventually_isometric=isometric,
        lambda_floor=floor,
        power_tail=power,
        degree_ge2_io=any(g.degree >= 2 for g in period) if power else None,
        isometric_from=start if isometric else None,
    )


# ---------------------------------------------------------------------------
# composition blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompositionBlock:
    """``G_n^m = g_{m-1} o ... o g_n`` together with ``log Lambda_n^m``."""

    n: int
    m: int
    log_Lambda: float
    seq: MapSequence = field(repr=False, compare=False)

    def value_fn(self, z):
        _check_open_disc(z)
        if self.m == self.n:
            z = np.asarray(z, dtype=np.complex128)
            return z.copy() if z.ndim else complex(z)
        zeros, counts, coefs = self.seq.table(self.n, self.m)
        out = _kernels.compose_eval(zeros, counts, coefs, np.asarray(z, dtype=np.complex128))
        return out if np.ndim(out) else complex(out)

    __call__ = value_fn

    @property
    def Lambda(self) -> float:
        return math.exp(self.log_Lambda)


def lambda_at(seq: MapSequence, n: int) -> float:
    g = seq[n]
    lam = g.lam
    if lam == 0.0:
        raise DegenerateError(f"g_{n}'(0) = 0: the origin is critical")
    return lam


def log_Lambda(seq: MapSequence, n: int, m: int) -> float:
    """``sum_{k=n}^{m-1} log lambda_k``, accumulated term by term."""
    if seq.lambda_fn is not None:
        lam = seq.lambda_fn(np.arange(n, m))
        return float(np.sum(np.log(lam)))
    total = math.fsum(math.log(lambda_at(seq, k)) for k in range(n, m))
    return total


def compose_block(seq: MapSequence, n: int, m: int) -> CompositionBlock:
    if not (0 <= n <= m):
        raise DomainError(f"need 0 <= n <= m, got n={n}, m={m}")
    if seq.length is not None and m > seq.length:
        raise DomainError(f"end index {m} beyond explicit horizon {seq.length}")
    for k in range(n, m):
        if not seq[k].fixes_origin:
            raise DomainError(f"g_{k} does not fix the origin")
    return CompositionBlock(n, m, log_Lambda(seq, n, m), seq)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


class Verdict(str, enum.Enum):
    CONTRACTING = "Contracting"
    SEMI_CONTRACTING = "SemiContracting"
    EVENTUALLY_ISOMETRIC = "EventuallyIsometric"
    UNDETERMINED = "Undetermined"

    def __str__(self):
        return self.value


@dataclass
class ClassificationReport:
    verdict: Verdict
    partial_sums: list[float]
    horizon: int
    tail_meta: TailMeta | None

    def to_dict(self) -> dict:
        meta = None if self.tail_meta is None else self.tail_meta.__dict__.copy()
        return {
            "verdict": str(self.verdict),
            "horizon": self.horizon,
            "deficit_partial_sum": self.partial_sums[-1] if self.partial_sums else 0.0,
            "tail_meta": meta,
        }


def deficit_partial_sums(seq: MapSequence, horizon: int | None = None) -> np.ndarray:
    """Cumulative sums of ``1 - lambda_k`` for ``k < horizon``."""
    h = seq.available(seq.horizon if horizon is None else horizon)
    if seq.lambda_fn is not None:
        lam = seq.lambda_fn(np.arange(h))
    else:
        lam = seq.lambdas(0, h)
    return np.cumsum(1.0 - lam)


def classify(seq: MapSequence, horizon: int | None = None) -> ClassificationReport:
    sums = deficit_partial_sums(seq, horizon)
    h = len(sums)
    meta = seq.tail_meta
    if meta is None or meta.sum_diverges is None:
        verdict = Verdict.UNDETERMINED
    elif meta.eventually_isometric:
        verdict = Verdict.EVENTUALLY_ISOMETRIC
    elif meta.sum_diverges:
        verdict = Verdict.CONTRACTING
    else:
        verdict = Verdict.SEMI_CONTRACTING
    # Keep the evidence compact: sample the cumulative sums geometrically.
    idx = sorted({min(h - 1, 2**k - 1) for k in range(0, max(1, h).bit_length() + 1)}) if h else []
    return ClassificationReport(verdict, [float(sums[i]) for i in idx], h, meta)


def _parametric_tail_log(c, alpha, j0):
    """Estimate and bracket ``sum_{j >= j0} log(1 - c j**-alpha)``.

    Terms increase towards 0, so the sum lies between the integrals over
    ``[j0 - 1, inf)`` and ``[j0, inf)``; the estimate adds Euler-Maclaurin
    corrections to the latter.
    """
    f = lambda t: math.log1p(-c * t**-alpha)  # noqa: E731
    df = lambda t: (c * alpha * t ** (-alpha - 1)) / (1.0 - c * t**-alpha)  # noqa: E731
    upper, _ = integrate.quad(f, j0, math.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
    lower, _ = integrate.quad(f, j0 - 1, math.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
    estimate = upper + 0.5 * f(j0) - df(j0) / 12.0
    return estimate, (lower, upper)


def product_limit_interval(seq: MapSequence, n: int) -> tuple[float, float, float]:
    """``(estimate, lower, upper)`` for ``Lambda_n = prod_{k >= n} lambda_k``."""
    meta = seq.tail_meta
    if meta is not None and meta.sum_diverges:
        return 0.0, 0.0, 0.0
    if meta is not None and meta.eventually_isometric:
        stop = max(n, meta.isometric_from or 0)
        v = math.exp(log_Lambda(seq, n, stop))
        return v, v, v
    if seq.rule == "parametric":
        c, alpha = seq._param
        N = max(seq.horizon, n)
        head = log_Lambda(seq, n, N)
        est, (lo, hi) = _parametric_tail_log(c, alpha, N + 2)
        return math.exp(head + est), math.exp(head + lo), math.exp(head + hi)
    # No tail information: report the partial product over what is available.
    h = seq.available(seq.horizon)
    v = math.exp(log_Lambda(seq, n, max(n, h)))
    return v, 0.0, v


def product_limit(seq: MapSequence, n: int) -> float:
    return product_limit_interval(seq, n)[0]


def lower_modulus_bound(lam: float, r):
    """Lower bound ``r (lam - r) / (1 - lam r)`` for ``|g(z)|`` at ``|z| = r``."""
    r = np.asarray(r, dtype=float)
    return r * (lam - r) / (1.0 - lam * r)


def schwarz_lower_bound_check(g: BlaschkeMap, z, atol: float = 1e-12) -> bool:
    """Check ``|g(z)| >= |z| (lam - |z|) / (1 - lam |z|)`` at every given point."""
    if not g.fixes_origin:
        raise DomainError("the lower bound applies to maps fixing the origin")
    z = np.asarray(z, dtype=np.complex128)
    lam = abs(g.derivative_at_zero())
    return bool(np.all(np.abs(g.eval(z)) >= lower_modulus_bound(lam, np.abs(z)) - atol))
