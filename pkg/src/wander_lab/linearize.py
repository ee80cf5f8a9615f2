"""Non-autonomous Koenigs coordinates for origin-fixing sequences.

For a rotation-normalized sequence ``(g_n)`` with ``lambda_n = g_n'(0)`` the
normalized compositions ``E_n^m = G_n^m / Lambda_n^m`` converge to maps
``phi_n`` with ``phi_n(0) = 0``, ``phi_n'(0) = 1`` and
``phi_{n+1} o g_n = lambda_n phi_n``.

``E_n^m`` is never formed as a quotient.  Writing
``g_k(w) = lambda_k u_k w h_k(w)`` with ``h_k(0) = 1`` (``u_k`` unimodular),
the kernel accumulates ``E <- E * u_k * h_k(w)`` while pushing ``w`` forward,
which stays finite even when ``G_n^m`` underflows.

Truncation doubles the span ``m - n`` until the sup-norm gap between the last
two approximants on the grid drops below ``tol``.  For semi-contracting
sequences the error of ``E_n^m`` decays only like ``1/m``; there the gap is
measured between second-order Richardson extrapolants instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import DomainError, HypothesisError, NonConvergentError
from .innerseq import (
    MapSequence,
    Verdict,
    classify,
    compose_block,
    lambda_at,
    log_Lambda,
    product_limit,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_M = 2**16
MERGE_TOL = 1e-9


def univalence_radius(c: float) -> float:
    """Radius on which every origin-fixing self-map with ``|g'(0)| >= c`` is univalent.

    Critical points satisfy ``|w| >= R1 = tanh(artanh(c) / 2)``; the radius is
    ``h_c(R1)`` with ``h_c(r) = r (c - r) / (1 - c r)``.
    """
    c = float(c)
    if not (0.0 < c <= 1.0):
        raise DomainError(f"derivative bound must lie in (0, 1], got {c}")
    if c == 1.0:
        return 1.0
    r1 = math.tanh(0.5 * math.atanh(c))
    return r1 * (c - r1) / (1.0 - c * r1)


def critical_free_radius(c: float) -> float:
    """``R1(c)``: no critical point of such a map lies in ``|w| < R1``."""
    c = float(c)
    if not (0.0 < c <= 1.0):
        raise DomainError(f"derivative bound must lie in (0, 1], got {c}")
    return 1.0 if c == 1.0 else math.tanh(0.5 * math.atanh(c))


def koebe_bounds(R: float, r):
    """Koebe lower and upper bounds for ``|f(z)|`` at ``|z| = r`` when ``f'(0) = 1`` on ``D_R``."""
    r = np.asarray(r, dtype=float)
    return R * R * r / (R + r) ** 2, R * R * r / (R - r) ** 2


def disc_grid(radius: float, count: int = 400, boundary: bool = True) -> np.ndarray:
    """Roughly ``count`` points filling the closed disc of the given radius.

    A square lattice clipped to the disc, plus the boundary circle when asked.
    Ordering is deterministic.
    """
    radius = float(radius)
    count = max(int(count), 4)
    n_ring = max(8, int(round(math.sqrt(count))) * 2) if boundary else 0
    n_inner = max(count - n_ring, 1)
    side = max(2, int(math.ceil(math.sqrt(4.0 * n_inner / math.pi))))
    xs = np.linspace(-radius, radius, side)
    X, Y = np.meshgrid(xs, xs)
    Z = (X + 1j * Y).ravel()
    Z = Z[np.abs(Z) < radius * (1.0 - 1e-12)]
    if boundary:
        theta = 2.0 * np.pi * np.arange(n_ring) / n_ring
        Z = np.concatenate([Z, radius * np.exp(1j * theta)])
    return Z.astype(np.complex128)


# ---------------------------------------------------------------------------
# E_n^m
# ---------------------------------------------------------------------------


class _Accumulator:
    """Incremental ``(G_n^m(z), E_n^m(z))`` on a fixed set of points."""

    def __init__(self, seq: MapSequence, n: int, z):
        self.seq = seq
        self.n = n
        self.m = n
        self.w = np.array(z, dtype=np.complex128, copy=True).reshape(-1)
        self.e = self.w.copy()

    def advance_to(self, m: int, chunk: int = 8192):
        while self.m < m:
            stop = min(m, self.m + chunk)
            zeros, counts, units, lams = self.seq.koenigs_table(self.m, stop)
            _kernels.koenigs_advance(zeros, counts, units, lams, self.w, self.e)
            self.m = stop
        return self.e


def koenigs_E(seq: MapSequence, n: int, m: int, z):
    """``E_n^m(z) = G_n^m(z) / Lambda_n^m`` (array-friendly)."""
    if m < n:
        raise DomainError(f"need n <= m, got n={n}, m={m}")
    z = np.asarray(z, dtype=np.complex128)
    if np.any(~(np.abs(z) < 1.0)):
        raise DomainError("points must lie in the open unit disc")
    acc = _Accumulator(seq, n, z)
    out = acc.advance_to(m).reshape(z.shape)
    return out if out.ndim else complex(out)


def _richardson(values: list[np.ndarray], order: int = 2) -> list[np.ndarray]:
    """Extrapolate a doubling sequence assuming errors in powers of ``1/m``."""
    row = values
    for p in range(1, order + 1):
        f = 2.0**p
        row = [(f * row[i + 1] - row[i]) / (f - 1.0) for i in range(len(row) - 1)]
    return row


# ---------------------------------------------------------------------------
# koenigs_limit
# ---------------------------------------------------------------------------


@dataclass
class LinearizationResult:
    n: int
    m_used: int
    grid: np.ndarray
    phi_values: np.ndarray
    univalence_radius: float
    certified_radius: float
    residual_sup: float
    cauchy_gap: float
    converged: bool
    verdict: str
    lam: float
    accelerated: bool = False
    warnings: list[str] = field(default_factory=list)
    residuals: np.ndarray | None = None

    @property
    def status(self) -> str:
        return "Converged" if self.converged else "NonConvergent"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m_used": self.m_used,
            "status": self.status,
            "verdict": self.verdict,
            "lambda_n": self.lam,
            "univalence_radius": self.univalence_radius,
            "certified_radius": self.certified_radius,
            "residual_sup": self.residual_sup,
            "cauchy_gap": self.cauchy_gap,
            "accelerated": self.accelerated,
            "grid_size": int(self.grid.size),
            "warnings": list(self.warnings),
        }


def _lambda_floor(seq: MapSequence, verdict: Verdict, upto: int) -> float:
    meta = seq.tail_meta
    if meta is not None and meta.lambda_floor is not None:
        return meta.lambda_floor
    h = seq.available(upto)
    lams = seq.lambdas(0, h)
    floor = float(lams.min()) if lams.size else 0.0
    if verdict == Verdict.CONTRACTING or floor <= 0.0:
        raise HypothesisError(
            "no positive lower bound on lambda_n is known; "
            "uniform linearization needs lambda_n >= c > 0"
        )
    return floor


def certified_radius(seq: MapSequence, verdict: Verdict | None = None) -> tuple[float, float]:
    """``(Q, R)``: the radius where convergence is certified and the univalence radius."""
    verdict = classify(seq).verdict if verdict is None else verdict
    c = _lambda_floor(seq, verdict, seq.horizon)
    R = univalence_radius(c)
    if verdict == Verdict.CONTRACTING:
        return R, R
    if verdict in (Verdict.SEMI_CONTRACTING, Verdict.EVENTUALLY_ISOMETRIC):
        return product_limit(seq, 1), R
    return R, R


def _doubling_limit(seq, n, z, tol, max_m, accelerate):
    """Run the doubling schedule from index ``n``; returns a dict of traces."""
    acc = _Accumulator(seq, n, z)
    limit = seq.available(max_m)
    raw: list[np.ndarray] = []
    spans: list[int] = []
    span = 1
    best = None
    gap = math.inf
    while n + span <= limit:
        raw.append(acc.advance_to(n + span).copy())
        spans.append(span)
        vals = _richardson(raw) if accelerate else raw
        if len(vals) >= 2:
            gap = float(np.max(np.abs(vals[-1] - vals[-2]))) if z.size else 0.0
            best = vals[-1]
            if gap < tol:
                return {"values": best, "span": span, "gap": gap, "converged": True, "raw": raw}
        span *= 2
    if best is None:
        best = raw[-1] if raw else np.array(z, dtype=np.complex128, copy=True)
    return {
        "values": best,
        "span": spans[-1] if spans else 0,
        "gap": gap,
        "converged": False,
        "raw": raw,
    }


def koenigs_limit(
    seq: MapSequence,
    n: int,
    grid=None,
    tol: float = DEFAULT_TOL,
    max_m: int = DEFAULT_MAX_M,
    accelerate: bool | None = None,
    grid_count: int = 400,
) -> LinearizationResult:
    """Approximate ``phi_n`` on ``grid`` and certify the functional equation there.

    ``residual_sup`` compares ``phi_{n+1}(g_n(z))``, computed by its own doubling
    run from index ``n + 1``, with ``lambda_n phi_n(z)``.  A run that exhausts
    ``max_m`` (or the explicit horizon) returns ``converged = False``.
    """
    report = classify(seq)
    verdict = report.verdict
    Q, R = certified_radius(seq, verdict)
    if grid is None:
        grid = disc_grid(0.5 * Q, grid_count)
    grid = np.asarray(grid, dtype=np.complex128).reshape(-1)
    if np.any(~(np.abs(grid) < 1.0)):
        raise DomainError("grid points must lie in the open unit disc")
    if accelerate is None:
        accelerate = verdict == Verdict.SEMI_CONTRACTING

    warnings = []
    outside = int(np.count_nonzero(np.abs(grid) >= Q))
    if outside:
        warnings.append(f"{outside} grid point(s) outside the certified disc |z| < {Q:.6g}")
    if verdict == Verdict.UNDETERMINED:
        warnings.append("sequence tail is undetermined; convergence is empirical only")

    g_n = seq[n]
    lam_n = lambda_at(seq, n)
    main = _doubling_limit(seq, n, grid, tol, max_m, accelerate)
    pushed = np.asarray(g_n.eval(grid)).reshape(-1)
    nxt = _doubling_limit(seq, n + 1, pushed, tol, max_m, accelerate)
    pointwise = np.abs(nxt["values"] - lam_n * main["values"])
    residual = float(np.max(pointwise)) if grid.size else 0.0

    return LinearizationResult(
        n=n,
        m_used=n + main["span"],
        grid=grid,
        phi_values=main["values"],
        univalence_radius=R,
        certified_radius=Q,
        residual_sup=residual,
        cauchy_gap=main["gap"],
        converged=bool(main["converged"] and nxt["converged"]),
        verdict=str(verdict),
        lam=lam_n,
        accelerated=bool(accelerate),
        warnings=warnings,
        residuals=pointwise,
    )


def linearize_pair(seq: MapSequence, n: int, grid, **kw):
    """``(phi_n on grid, phi_{n+1} on g_n(grid))`` as two independent results."""
    grid = np.asarray(grid, dtype=np.complex128).reshape(-1)
    first = koenigs_limit(seq, n, grid, **kw)
    second = koenigs_limit(seq, n + 1, np.asarray(seq[n].eval(grid)).reshape(-1), **kw)
    return first, second


def commutation_residual(seq: MapSequence, family, grid=None) -> float:
    """``sup |phi_{n+1}(g_n(z)) - lambda_n phi_n(z)|`` over the grid.

    ``family`` is a pair ``(phi_n result, phi_{n+1} result)`` as returned by
    :func:`linearize_pair`, or a mapping ``{n: result, n + 1: result}``.  When the
    results already share the grid the ``grid`` argument may be omitted.
    """
    if isinstance(family, dict):
        keys = sorted(family)
        first, second = family[keys[0]], family[keys[1]]
    else:
        first, second = family
    n = first.n
    if second.n != n + 1:
        raise DomainError("family must hold consecutive indices n and n + 1")
    if grid is not None:
        grid = np.asarray(grid, dtype=np.complex128).reshape(-1)
        if not np.array_equal(grid, first.grid):
            raise DomainError("grid does not match the phi_n result")
    pushed = np.asarray(seq[n].eval(first.grid)).reshape(-1)
    if not np.allclose(pushed, second.grid, rtol=0.0, atol=1e-14):
        raise DomainError("phi_{n+1} result must be sampled at g_n(grid)")
    lam = lambda_at(seq, n)
    return float(np.max(np.abs(second.phi_values - lam * first.phi_values)))


# ---------------------------------------------------------------------------
# spreading by the dynamics
# ---------------------------------------------------------------------------


def _escape_index(seq: MapSequence, n: int, z: complex, radius: float) -> int:
    w = complex(z)
    k = 0
    horizon = seq.available(seq.horizon)
    while abs(w) >= radius:
        if n + k >= horizon:
            raise NonConvergentError(
                f"orbit of {z} did not enter |w| < {radius:.3g} within the horizon {horizon}"
            )
        w = complex(seq[n + k].eval(w))
        k += 1
    return k


def extend_by_dynamics(
    seq: MapSequence,
    n: int,
    z: complex,
    base: Callable[[int, np.ndarray], np.ndarray] | None = None,
    extra_steps: int = 0,
    tol: float = DEFAULT_TOL,
    max_m: int = DEFAULT_MAX_M,
) -> complex:
    """``phi_n(z) = phi_{n+k}(G_n^{n+k}(z)) / Lambda_n^{n+k}`` for the least admissible ``k``.

    ``k`` is the first index with ``|G_n^{n+k}(z)| < R``; ``extra_steps`` pushes
    further, which must not change the value.  ``base(j, points)`` evaluates
    ``phi_j`` on points of the univalence disc; by default it runs
    :func:`koenigs_limit`.
    """
    verdict = classify(seq).verdict
    if verdict != Verdict.CONTRACTING:
        raise HypothesisError("spreading by the dynamics is used for contracting sequences")
    z = complex(z)
    if not abs(z) < 1.0:
        raise DomainError("z must lie in the open unit disc")
    _, R = certified_radius(seq, verdict)
    k = _escape_index(seq, n, z, R) + int(extra_steps)
    block = compose_block(seq, n, n + k)
    w = complex(block(z))
    if base is None:
        res = koenigs_limit(seq, n + k, np.array([w]), tol=tol, max_m=max_m)
        if not res.converged:
            raise NonConvergentError(f"phi_{n + k} did not converge at {w}")
        phi_w = complex(res.phi_values[0])
    else:
        phi_w = complex(np.asarray(base(n + k, np.array([w])))[0])
    return phi_w * math.exp(-block.log_Lambda)


def evaluate_phi(seq: MapSequence, n: int, points, tol: float = DEFAULT_TOL, max_m: int = DEFAULT_MAX_M):
    """``phi_n`` at arbitrary disc points.

    Contracting sequences use the direct limit inside the univalence disc and
    spreading by the dynamics outside it; other sequences use the direct limit
    everywhere.  Returns ``(values, converged)``.
    """
    pts = np.asarray(points, dtype=np.complex128).reshape(-1)
    verdict = classify(seq).verdict
    out = np.empty_like(pts)
    ok = True
    if verdict == Verdict.CONTRACTING:
        _, R = certified_radius(seq, verdict)
        inner = np.abs(pts) < R
        if inner.any():
            res = koenigs_limit(seq, n, pts[inner], tol=tol, max_m=max_m)
            out[inner] = res.phi_values
            ok &= res.converged
        # group the outer points by escape time so each level needs one limit
        outer = np.flatnonzero(~inner)
        groups: dict[int, list[int]] = {}
        for i in outer:
            groups.setdefault(_escape_index(seq, n, complex(pts[i]), R), []).append(i)
        for k, idx in groups.items():
            block = compose_block(seq, n, n + k)
            res = koenigs_limit(seq, n + k, block(pts[idx]), tol=tol, max_m=max_m)
            out[idx] = res.phi_values * math.exp(-block.log_Lambda)
            ok &= res.converged
    else:
        res = koenigs_limit(seq, n, pts, tol=tol, max_m=max_m)
        out[:] = res.phi_values
        ok &= res.converged
    return out, ok


# ---------------------------------------------------------------------------
# quotient surface
# ---------------------------------------------------------------------------


@dataclass
class QuotientSurfaceModel:
    kind: str  # "PlaneMinusSet" | "DiscMinusSet"
    marked_points: list[complex]
    countable_flag: bool
    horizon: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "marked_points": [[p.real, p.imag] for p in self.marked_points],
            "countable_flag": self.countable_flag,
            "horizon": self.horizon,
            "warnings": list(self.warnings),
        }


def _merge_points(points, tol=MERGE_TOL) -> list[complex]:
    kept: list[complex] = []
    for p in points:
        if all(abs(p - q) > tol for q in kept):
            kept.append(complex(p))
    return kept


def quotient_surface_model(
    seq: MapSequence,
    horizon: int = 8,
    c: float | None = None,
    tol: float = DEFAULT_TOL,
    max_m: int = DEFAULT_MAX_M,
) -> QuotientSurfaceModel:
    """The quotient surface ``C minus E~`` or ``D minus E~`` with ``E~`` sampled up to ``horizon``.

    Every critical value ``v`` of ``g_k`` (``k < horizon``) is a singular value at
    level ``k + 1``; its grand orbit is recorded at index 0 as
    ``phi_{k+1}(v) / Lambda_0^{k+1}``.  Points closer than ``1e-9`` are merged.

    In the non-contracting case the coordinate is rescaled by ``Lambda_0`` so
    the surface is realized inside the unit disc: ``Lambda_0 phi_0`` is the
    limit of ``G_0^m``, an inner function.
    """
    verdict = classify(seq).verdict
    if verdict == Verdict.UNDETERMINED:
        raise HypothesisError("classification is Undetermined; the quotient surface is not identified")
    meta = seq.tail_meta
    if c is None:
        c = meta.lambda_floor if meta is not None else None
    if c is None or c <= 0.0:
        raise HypothesisError("a positive lower bound c on lambda_n must be supplied")
    horizon = seq.available(horizon)
    for k in range(horizon):
        if lambda_at(seq, k) < c - 1e-15:
            raise HypothesisError(f"lambda_{k} = {lambda_at(seq, k)} violates the bound c = {c}")

    contracting = verdict == Verdict.CONTRACTING
    disc_scale = 1.0 if contracting else product_limit(seq, 0)
    warnings: list[str] = []
    candidates: list[complex] = []
    for k in range(horizon):
        values = seq[k].critical_values()
        if values.size == 0:
            continue
        phi, ok = evaluate_phi(seq, k + 1, values, tol=tol, max_m=max_m)
        if not ok:
            warnings.append(f"phi_{k + 1} at the critical values of g_{k} did not converge")
        scale = math.exp(-log_Lambda(seq, 0, k + 1)) * disc_scale
        candidates.extend(complex(p) * scale for p in phi)
    marked = _merge_points(candidates)
    return QuotientSurfaceModel(
        kind="PlaneMinusSet" if contracting else "DiscMinusSet",
        marked_points=marked,
        countable_flag=contracting,
        horizon=horizon,
        warnings=warnings,
    )
