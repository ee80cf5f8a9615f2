"""Hot inner loops: Blaschke evaluation chains, Koenigs accumulation, pair scans.

Every kernel has a pure-numpy implementation and, when numba is importable,
an ``@njit`` twin with the same signature.  The twin is used unless the
environment variable ``WANDER_LAB_DISABLE_NUMBA`` is set to a truthy value.

Map tables are packed as

    zeros  : complex128[n_maps, max_deg]   (rows padded with 0j)
    counts : int64[n_maps]                 (number of valid zeros per row)
    coefs  : complex128[n_maps]            (rotation * scale)

so that map ``k`` is ``coefs[k] * prod_j (z - a_kj) / (1 - conj(a_kj) z)``.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("WANDER_LAB_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - exercised implicitly by whichever backend is live
    import numba

    HAS_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip TBB: distribution builds are often older than numba accepts
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

# Koenigs accumulation freezes a point once its orbit is this small; the
# remaining factors equal 1 to machine precision.
FREEZE = 1e-300

# point count from which the chain kernels use their parallel builds
PARALLEL_MIN_POINTS = 4096


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def np_blaschke_eval(zeros, count, coef, z):
    z = np.asarray(z, dtype=np.complex128)
    out = np.full(z.shape, coef, dtype=np.complex128)
    for j in range(count):
        a = zeros[j]
        out *= (z - a) / (1.0 - np.conj(a) * z)
    return out


def np_blaschke_deriv(zeros, count, coef, z):
    # Product rule with prefix/suffix products: exact at the zeros as well.
    z = np.asarray(z, dtype=np.complex128)
    if count == 0:
        return np.zeros(z.shape, dtype=np.complex128)
    factors = []
    dfactors = []
    for j in range(count):
        a = zeros[j]
        den = 1.0 - np.conj(a) * z
        factors.append((z - a) / den)
        dfactors.append((1.0 - abs(a) ** 2) / (den * den))
    out = np.zeros(z.shape, dtype=np.complex128)
    prefix = np.ones(z.shape, dtype=np.complex128)
    suffix = [np.ones(z.shape, dtype=np.complex128)]
    for j in range(count - 1, 0, -1):
        suffix.append(suffix[-1] * factors[j])
    suffix.reverse()
    for j in range(count):
        out += prefix * dfactors[j] * suffix[j]
        prefix = prefix * factors[j]
    return coef * out


def np_compose_eval(zeros, counts, coefs, z):
    w = np.array(z, dtype=np.complex128, copy=True)
    for k in range(counts.shape[0]):
        w = np_blaschke_eval(zeros[k], counts[k], coefs[k], w)
    return w


def np_koenigs_advance(zeros, counts, units, lams, w, e):
    """Push ``w`` through maps fixing 0 while accumulating ``E = G / Lambda``.

    ``zeros`` rows hold only the nonzero zeros; each map is
    ``units[k] * lams[k] * w * prod (1 - w/a) / (1 - conj(a) w)``.
    Updates ``w`` and ``e`` in place.
    """
    for k in range(counts.shape[0]):
        live = np.abs(w) > FREEZE
        if not live.any():
            break
        wl = w[live]
        h = np.full(wl.shape, units[k], dtype=np.complex128)
        for j in range(counts[k]):
            a = zeros[k, j]
            h *= (1.0 - wl / a) / (1.0 - np.conj(a) * wl)
        e[live] *= h
        w[live] = lams[k] * wl * h
    return w, e


def np_min_hyp_gap(points, block=2048):
    """Minimal pairwise Poincare distance, inf for fewer than two points."""
    p = np.asarray(points, dtype=np.complex128)
    n = p.shape[0]
    best = np.inf
    for i0 in range(0, n, block):
        a = p[i0 : i0 + block]
        for j0 in range(i0, n, block):
            b = p[j0 : j0 + block]
            num = np.abs(a[:, None] - b[None, :])
            den = np.abs(1.0 - a[:, None] * np.conj(b)[None, :])
            ratio = num / den
            if i0 == j0:
                ratio[np.tril_indices(ratio.shape[0])] = np.inf
            m = ratio.min() if ratio.size else np.inf
            if m < best:
                best = m
    if not np.isfinite(best):
        return np.inf
    return float(2.0 * np.arctanh(best))


def np_count_close_pairs(values, tol):
    """Number of pairs ``i < j`` with ``|values[i] - values[j]| < tol``."""
    v = np.asarray(values, dtype=np.complex128)
    order = np.argsort(v.real, kind="stable")
    s = v[order]
    n = s.shape[0]
    total = 0
    shift = 1
    while shift < n:
        dre = s.real[shift:] - s.real[:-shift]
        window = dre < tol
        if not window.any():
            break
        close = np.abs(s[shift:][window] - s[:-shift][window]) < tol
        total += int(close.sum())
        shift += 1
    return total


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @numba.njit(cache=True)
    def _nb_eval_scalar(zeros, count, coef, z):
        # numerator and denominator products, one complex division per map;
        # |1 - conj(a) z| >= 1 - |a| keeps the denominator far from underflow
        num = coef
        den = 1.0 + 0j
        for j in range(count):
            a = zeros[j]
            num *= z - a
            den *= 1.0 - a.conjugate() * z
        return num / den

    @numba.njit(cache=True)
    def nb_blaschke_eval(zeros, count, coef, z):
        out = np.empty(z.shape[0], dtype=np.complex128)
        for i in range(z.shape[0]):
            out[i] = _nb_eval_scalar(zeros, count, coef, z[i])
        return out

    @numba.njit(cache=True)
    def nb_blaschke_deriv(zeros, count, coef, z):
        out = np.zeros(z.shape[0], dtype=np.complex128)
        if count == 0:
            return out
        fac = np.empty(count, dtype=np.complex128)
        dfac = np.empty(count, dtype=np.complex128)
        for i in range(z.shape[0]):
            zi = z[i]
            for j in range(count):
                a = zeros[j]
                den = 1.0 - a.conjugate() * zi
                fac[j] = (zi - a) / den
                dfac[j] = (1.0 - abs(a) ** 2) / (den * den)
            acc = 0j
            for j in range(count):
                term = dfac[j]
                for k in range(count):
                    if k != j:
                        term *= fac[k]
                acc += term
            out[i] = coef * acc
        return out

    # The chain kernels loop maps outermost and points innermost, in real
    # arithmetic with one reciprocal per map: the inner loop then vectorises.

    @numba.njit(cache=True, inline="always")
    def _nb_quotient(nr, ni, dr, di):
        m = dr * dr + di * di
        if m < 1e-280:  # |den|^2 near underflow: use the scaled complex division
            q = complex(nr, ni) / complex(dr, di)
            return q.real, q.imag
        m = 1.0 / m
        return (nr * dr + ni * di) * m, (ni * dr - nr * di) * m

    def _compose_body(zeros, counts, coefs, z):
        n = z.shape[0]
        wr = np.empty(n)
        wi = np.empty(n)
        for i in range(n):
            wr[i] = z[i].real
            wi[i] = z[i].imag
        for k in range(counts.shape[0]):
            cr, ci, cnt = coefs[k].real, coefs[k].imag, counts[k]
            for i in numba.prange(n):
                xr, xi = wr[i], wi[i]
                nr, ni, dr, di = cr, ci, 1.0, 0.0
                for j in range(cnt):
                    ar, ai = zeros[k, j].real, zeros[k, j].imag
                    pr, pi = xr - ar, xi - ai
                    nr, ni = nr * pr - ni * pi, nr * pi + ni * pr
                    # 1 - conj(a) w
                    yr, yi = 1.0 - (ar * xr + ai * xi), ai * xr - ar * xi
                    dr, di = dr * yr - di * yi, dr * yi + di * yr
                wr[i], wi[i] = _nb_quotient(nr, ni, dr, di)
        out = np.empty(n, dtype=np.complex128)
        for i in range(n):
            out[i] = complex(wr[i], wi[i])
        return out

    def _koenigs_body(zeros, counts, units, lams, w, e):
        n = w.shape[0]
        wr = np.empty(n)
        wi = np.empty(n)
        er = np.empty(n)
        ei = np.empty(n)
        for i in range(n):
            wr[i], wi[i] = w[i].real, w[i].imag
            er[i], ei[i] = e[i].real, e[i].imag
        for k in range(counts.shape[0]):
            ur, ui, lam, cnt = units[k].real, units[k].imag, lams[k], counts[k]
            for i in numba.prange(n):
                xr, xi = wr[i], wi[i]
                if math.hypot(xr, xi) <= FREEZE:
                    continue
                # (1 - w/a) / (1 - conj(a) w) = (a - w) / (a - |a|^2 w)
                nr, ni, dr, di = ur, ui, 1.0, 0.0
                for j in range(cnt):
                    ar, ai = zeros[k, j].real, zeros[k, j].imag
                    a2 = ar * ar + ai * ai
                    pr, pi = ar - xr, ai - xi
                    nr, ni = nr * pr - ni * pi, nr * pi + ni * pr
                    yr, yi = ar - a2 * xr, ai - a2 * xi
                    dr, di = dr * yr - di * yi, dr * yi + di * yr
                hr, hi = _nb_quotient(nr, ni, dr, di)
                er[i], ei[i] = er[i] * hr - ei[i] * hi, er[i] * hi + ei[i] * hr
                wr[i], wi[i] = lam * (xr * hr - xi * hi), lam * (xr * hi + xi * hr)
        for i in range(n):
            w[i] = complex(wr[i], wi[i])
            e[i] = complex(er[i], ei[i])
        return w, e

    # prange degrades to range in the serial builds, which avoid the
    # per-map parallel launch on small point sets
    nb_compose_eval = numba.njit(cache=True)(_compose_body)
    nb_koenigs_advance = numba.njit(cache=True)(_koenigs_body)
    nb_compose_eval_par = numba.njit(cache=True, parallel=True)(_compose_body)
    nb_koenigs_advance_par = numba.njit(cache=True, parallel=True)(_koenigs_body)

    @numba.njit(cache=True)
    def _nb_min_ratio(p):
        n = p.shape[0]
        best = np.inf
        for i in range(n):
            for j in range(i + 1, n):
                r = abs(p[i] - p[j]) / abs(1.0 - p[i] * p[j].conjugate())
                if r < best:
                    best = r
        return best

    def nb_min_hyp_gap(points):
        p = np.ascontiguousarray(points, dtype=np.complex128)
        best = _nb_min_ratio(p)
        if not np.isfinite(best):
            return np.inf
        return float(2.0 * np.arctanh(best))

    @numba.njit(cache=True)
    def _nb_sweep(s, tol):
        n = s.shape[0]
        total = 0
        for i in range(n):
            j = i + 1
            while j < n and s[j].real - s[i].real < tol:
                if abs(s[j] - s[i]) < tol:
                    total += 1
                j += 1
        return total

    def nb_count_close_pairs(values, tol):
        v = np.asarray(values, dtype=np.complex128)
        s = v[np.argsort(v.real, kind="stable")]
        return int(_nb_sweep(s, tol))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _as_1d(z):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=np.complex128)))


def blaschke_eval(zeros, count, coef, z):
    if USE_NUMBA:
        flat = _as_1d(z)
        out = nb_blaschke_eval(zeros, count, complex(coef), flat.ravel())
        return out.reshape(np.shape(z))
    return np_blaschke_eval(zeros, count, coef, z)


def blaschke_deriv(zeros, count, coef, z):
    if USE_NUMBA:
        flat = _as_1d(z)
        out = nb_blaschke_deriv(zeros, count, complex(coef), flat.ravel())
        return out.reshape(np.shape(z))
    return np_blaschke_deriv(zeros, count, coef, z)


def compose_eval(zeros, counts, coefs, z):
    if USE_NUMBA:
        flat = _as_1d(z).ravel()
        kernel = nb_compose_eval_par if flat.size >= PARALLEL_MIN_POINTS else nb_compose_eval
        out = kernel(zeros, counts, coefs, flat)
        return out.reshape(np.shape(z))
    return np_compose_eval(zeros, counts, coefs, z)


def koenigs_advance(zeros, counts, units, lams, w, e):
    if USE_NUMBA:
        kernel = nb_koenigs_advance_par if w.size >= PARALLEL_MIN_POINTS else nb_koenigs_advance
        return kernel(zeros, counts, units, lams, w, e)
    return np_koenigs_advance(zeros, counts, units, lams, w, e)


def min_hyp_gap(points):
    if USE_NUMBA:
        return nb_min_hyp_gap(points)
    return np_min_hyp_gap(points)


def count_close_pairs(values, tol):
    if USE_NUMBA:
        return nb_count_close_pairs(values, tol)
    return np_count_close_pairs(values, tol)
