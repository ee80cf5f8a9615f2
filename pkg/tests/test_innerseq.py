import cmath
import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import blaschke_direct, nested, semi_product_exact, telescoping_product
from wander_lab import innerseq
from wander_lab.errors import DegenerateError, DomainError
from wander_lab.innerseq import BlaschkeMap, MapSequence, Verdict

disc_points = st.builds(
    lambda r, t: r * cmath.exp(1j * t),
    st.floats(0.0, 0.95),
    st.floats(0.0, 2 * math.pi),
)
zero_lists = st.lists(disc_points, min_size=1, max_size=5)


def random_origin_map(rng, lam=None, degree=2):
    """Degree-``degree`` inner map fixing 0 with ``|g'(0)| = lam``."""
    if lam is None:
        lam = rng.uniform(0.05, 0.99)
    others = rng.uniform(0.0, 1.0, size=degree - 1)
    mods = others / others.sum() * math.log(lam) if degree > 1 else []
    zeros = [0.0] + [math.exp(m) * cmath.exp(2j * math.pi * rng.uniform()) for m in mods]
    return BlaschkeMap(zeros)


class TestBlaschkeMap:
    def test_eval_examples(self):
        assert BlaschkeMap.identity()(0.3) == pytest.approx(0.3)
        B = BlaschkeMap([0, -0.8])
        assert B(0) == 0
        assert B(0.5) == pytest.approx(0.5 * 1.3 / 1.4, abs=1e-15)

    def test_validation(self):
        with pytest.raises(DomainError, match="1"):
            BlaschkeMap([0.1, 1.2])
        with pytest.raises(DomainError):
            BlaschkeMap([])
        with pytest.raises(DomainError):
            BlaschkeMap([0], rotation=2.0)
        with pytest.raises(DomainError):
            BlaschkeMap([0], scale=1.5)

    def test_eval_domain(self):
        with pytest.raises(DomainError):
            BlaschkeMap([0.2])(1.0)

    @given(zero_lists, disc_points, st.floats(0, 2 * math.pi))
    def test_matches_direct_product(self, zeros, z, t):
        g = BlaschkeMap(zeros, rotation=cmath.exp(1j * t))
        assert g(z) == pytest.approx(blaschke_direct(zeros, z, cmath.exp(1j * t)), abs=1e-12)

    @given(zero_lists)
    def test_inner_on_circle(self, zeros):
        g = BlaschkeMap(zeros)
        theta = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
        assert np.max(np.abs(np.abs(g.on_circle(theta)) - 1.0)) < 1e-10

    @given(zero_lists, disc_points)
    def test_derivative_finite_difference(self, zeros, z):
        g = BlaschkeMap(zeros)
        if abs(z) > 0.9:
            return
        h = 1e-6
        fd = (g(z + h) - g(z - h)) / (2 * h)
        assert abs(g.derivative(z) - fd) < 1e-7 * max(1.0, abs(fd))

    def test_derivative_examples(self):
        assert BlaschkeMap.identity().derivative(0.7) == pytest.approx(1.0)
        assert BlaschkeMap([0, -0.8]).derivative(0) == pytest.approx(0.8, abs=1e-15)
        assert BlaschkeMap.rotation_map(1.3).derivative(0) == pytest.approx(cmath.exp(1.3j))

    def test_derivative_at_zero_of_repeated_zero(self):
        assert BlaschkeMap([0.0, 0.0]).derivative(0.0) == 0

    def test_lambda_product_of_moduli(self):
        g = BlaschkeMap([0, 0.5j, -0.6])
        assert g.lam == pytest.approx(0.3, abs=1e-15)
        assert abs(g.derivative(0)) == pytest.approx(0.3, abs=1e-15)

    def test_critical_points(self):
        g = BlaschkeMap([0, -0.5])
        (c,) = g.critical_points()
        assert abs(g.derivative(c)) < 1e-12
        assert BlaschkeMap([0.3]).critical_points().size == 0
        assert np.allclose(BlaschkeMap([0, 0, 0]).critical_points(), 0, atol=1e-6)

    def test_scaled_maps(self):
        g = BlaschkeMap.linear(0.5)
        assert not g.is_inner
        assert g.lam == 0.5
        assert g(0.4) == pytest.approx(0.2)

    def test_roundtrip_and_hash(self):
        g = BlaschkeMap([0, 0.2 - 0.3j], rotation=cmath.exp(0.4j))
        h = BlaschkeMap.from_dict(g.to_dict())
        assert g == h and hash(g) == hash(h)

    def test_nonzero_zeros(self):
        assert np.allclose(BlaschkeMap([0, 0.4]).nonzero_zeros(), [0.4])
        with pytest.raises(DegenerateError):
            BlaschkeMap([0, 0]).nonzero_zeros()


class TestNormalize:
    def test_identity_and_rotation(self):
        assert innerseq.normalize_rotation(BlaschkeMap.identity())(0.3) == pytest.approx(0.3)
        r = innerseq.normalize_rotation(BlaschkeMap.rotation_map(0.9))
        assert r(0.3 + 0.1j) == pytest.approx(0.3 + 0.1j)

    def test_koenigs_with_phase(self):
        g = BlaschkeMap([0, -0.5], rotation=cmath.exp(1j * math.pi / 3))
        d = innerseq.normalize_rotation(g).derivative(0)
        assert abs(d.imag) < 1e-12 and d.real == pytest.approx(0.5)

    def test_critical_origin(self):
        with pytest.raises(DegenerateError):
            innerseq.normalize_rotation(BlaschkeMap([0, 0]))

    def test_sequences_normalize(self):
        g = BlaschkeMap([0, -0.5], rotation=1j)
        seq = MapSequence.constant(g)
        assert seq[0].derivative(0) == pytest.approx(0.5)


class TestSequences:
    def test_deterministic(self):
        seq = MapSequence.parametric()
        assert seq[7] is seq[7]
        assert MapSequence.parametric()[7] == seq[7]

    def test_concurrent_materialization(self):
        seq = MapSequence.parametric()
        out = []

        def work():
            out.append([seq[k] for k in range(300)])

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(lst == out[0] for lst in out)

    def test_explicit_horizon(self):
        seq = MapSequence.explicit([BlaschkeMap.koenigs_pair(0.5)] * 3)
        assert seq.available(10) == 3
        with pytest.raises(IndexError):
            seq[3]
        with pytest.raises(DomainError):
            innerseq.compose_block(seq, 0, 4)

    def test_parametric_validation(self):
        with pytest.raises(DomainError):
            MapSequence.parametric(c=5.0, alpha=2.0)
        with pytest.raises(DomainError):
            MapSequence.parametric(family="cubic")

    @pytest.mark.parametrize(
        "seq",
        [
            MapSequence.parametric(),
            MapSequence.constant(BlaschkeMap.koenigs_pair(0.3)),
            MapSequence.rotation_tail([BlaschkeMap.koenigs_pair(0.5)], 0.2),
            MapSequence.explicit([BlaschkeMap([0, 0.1j])]),
        ],
    )
    def test_description_roundtrip(self, seq):
        again = MapSequence.from_description(seq.to_description())
        assert again.to_description() == seq.to_description()
        assert again[0] == seq[0]

    def test_head_counts_toward_lambda_floor(self):
        seq = MapSequence.rotation_tail([BlaschkeMap.koenigs_pair(0.5)], 0.2)
        assert seq.tail_meta.lambda_floor == pytest.approx(0.5)


class TestComposition:
    def test_identity_block(self):
        b = innerseq.compose_block(MapSequence.parametric(), 4, 4)
        assert b(0.3) == 0.3 and b.log_Lambda == 0.0

    def test_linear_block(self):
        seq = MapSequence.constant(BlaschkeMap.linear(0.5))
        b = innerseq.compose_block(seq, 0, 10)
        assert b(0.7) == pytest.approx(0.5**10 * 0.7, rel=1e-14)
        assert b.log_Lambda == pytest.approx(10 * math.log(0.5))

    def test_nested_oracle(self):
        g = BlaschkeMap.koenigs_pair(0.5)
        seq = MapSequence.constant(g)
        f = lambda z: z * (z + 0.5) / (1 + 0.5 * z)  # noqa: E731
        assert innerseq.compose_block(seq, 0, 3)(0.4) == pytest.approx(nested([f] * 3, 0.4), abs=1e-15)

    def test_cocycle(self, rng):
        seq = MapSequence.parametric()
        for _ in range(100):
            n, mid, m = sorted(rng.integers(0, 40, size=3))
            z = 0.9 * rng.uniform() * cmath.exp(2j * math.pi * rng.uniform())
            whole = innerseq.compose_block(seq, n, m)(z)
            split = innerseq.compose_block(seq, mid, m)(innerseq.compose_block(seq, n, mid)(z))
            assert abs(whole - split) < 1e-10
            lhs = innerseq.log_Lambda(seq, n, m)
            assert lhs == pytest.approx(innerseq.log_Lambda(seq, n, mid) + innerseq.log_Lambda(seq, mid, m))

    def test_log_space_no_underflow(self):
        seq = MapSequence.constant(BlaschkeMap.linear(0.1))
        assert innerseq.log_Lambda(seq, 0, 1000) == pytest.approx(1000 * math.log(0.1))

    def test_degenerate_lambda(self):
        seq = MapSequence.constant(BlaschkeMap([0, 0]))
        with pytest.raises(DegenerateError):
            innerseq.lambda_at(seq, 0)
        with pytest.raises(DegenerateError):
            innerseq.compose_block(seq, 0, 2)

    def test_lambda_at_examples(self):
        assert innerseq.lambda_at(MapSequence.constant(BlaschkeMap.identity()), 0) == 1.0
        assert innerseq.lambda_at(MapSequence.constant(BlaschkeMap.koenigs_pair(0.8)), 3) == pytest.approx(0.8)


class TestClassify:
    def test_constant_045(self):
        assert innerseq.classify(MapSequence.constant(BlaschkeMap.linear(0.45))).verdict == Verdict.CONTRACTING
        g = BlaschkeMap([0, -0.9], scale=0.5)
        assert innerseq.classify(MapSequence.constant(g)).verdict == Verdict.CONTRACTING

    def test_semi(self):
        assert innerseq.classify(MapSequence.parametric()).verdict == Verdict.SEMI_CONTRACTING

    def test_rotation_tail(self):
        head = [BlaschkeMap.koenigs_pair(0.5)] * 5
        report = innerseq.classify(MapSequence.rotation_tail(head, 0.3))
        assert report.verdict == Verdict.EVENTUALLY_ISOMETRIC
        assert report.tail_meta.eventually_isometric

    def test_explicit_undetermined(self):
        report = innerseq.classify(MapSequence.explicit([BlaschkeMap.koenigs_pair(0.5)] * 4))
        assert report.verdict == Verdict.UNDETERMINED
        assert report.partial_sums[-1] == pytest.approx(2.0)

    def test_contracting_escape(self):
        seq = MapSequence.constant(BlaschkeMap.koenigs_pair(0.9))
        assert innerseq.classify(seq).verdict == Verdict.CONTRACTING
        vals = [abs(innerseq.compose_block(seq, 0, m)(0.3)) for m in range(0, 201, 20)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-6


class TestProductLimit:
    def test_examples(self):
        assert innerseq.product_limit(MapSequence.constant(BlaschkeMap.linear(0.5)), 0) == 0.0
        assert innerseq.product_limit(MapSequence.constant(BlaschkeMap.identity()), 0) == 1.0

    @pytest.mark.parametrize("n", [0, 1, 5, 50])
    def test_semi_telescoping(self, n):
        seq = MapSequence.parametric()
        est, lo, hi = innerseq.product_limit_interval(seq, n)
        exact = semi_product_exact(n)
        assert lo <= exact <= hi
        assert est == pytest.approx(exact, abs=1e-12)

    def test_semi_partial_product(self):
        assert innerseq.product_limit(MapSequence.parametric(), 0) == pytest.approx(
            telescoping_product(0, 10**6), abs=1e-6
        )

    def test_linear_family_agrees(self):
        a = innerseq.product_limit(MapSequence.parametric(family="linear"), 2)
        assert a == pytest.approx(semi_product_exact(2), abs=1e-12)

    def test_rotation_tail(self):
        seq = MapSequence.rotation_tail([BlaschkeMap.koenigs_pair(0.5)] * 2, 0.1)
        assert innerseq.product_limit(seq, 0) == pytest.approx(0.25)
        assert innerseq.product_limit(seq, 2) == 1.0

    @pytest.mark.parametrize(
        "seq",
        [
            MapSequence.parametric(),
            MapSequence.parametric(c=0.5, alpha=1.0),
            MapSequence.constant(BlaschkeMap.koenigs_pair(0.7)),
            MapSequence.rotation_tail([BlaschkeMap.koenigs_pair(0.5)], 0.0),
            MapSequence.constant(BlaschkeMap.identity()),
        ],
    )
    def test_dichotomy(self, seq):
        contracting = innerseq.classify(seq).verdict == Verdict.CONTRACTING
        assert (innerseq.product_limit(seq, 0) > 0) == (not contracting)


class TestLowerModulusBound:
    def test_examples(self):
        assert innerseq.schwarz_lower_bound_check(BlaschkeMap.identity(), 0.5)
        assert innerseq.lower_modulus_bound(0.8, 0.3) == pytest.approx(0.3 * 0.5 / 0.76)
        assert innerseq.lower_modulus_bound(0.3, 0.0) == 0.0

    def test_random_degree_two(self, rng):
        for _ in range(1000):
            g = random_origin_map(rng, 0.8)
            assert innerseq.schwarz_lower_bound_check(g, 0.3)

    @given(st.lists(disc_points, min_size=0, max_size=4), st.floats(0.0, 1.0), st.floats(0, 2 * math.pi))
    def test_property(self, zeros, frac, t):
        g = BlaschkeMap([0.0] + zeros)
        lam = g.lam
        z = frac * lam * cmath.exp(1j * t)
        if abs(z) >= 1:
            return
        assert innerseq.schwarz_lower_bound_check(g, z)
