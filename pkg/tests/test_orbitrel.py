import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import min_pair_distance_brute
from wander_lab import hypgeo, linearize, orbitrel
from wander_lab.errors import DomainError
from wander_lab.innerseq import BlaschkeMap, MapSequence, compose_block
from wander_lab.orbitrel import Relation, discreteness_detect, grand_orbit_sample, preimages
from wander_lab.powertower import ANNULUS, CoveringTower, DegreeRule

KOENIGS = MapSequence.constant(BlaschkeMap.koenigs_pair(0.5))
SQUARING = MapSequence.constant(BlaschkeMap([0, 0]))

disc_points = st.builds(
    lambda r, t: r * cmath.exp(1j * t),
    st.floats(0.0, 0.9),
    st.floats(0.0, 2 * math.pi),
)


class TestPreimages:
    def test_examples(self):
        assert preimages(BlaschkeMap.identity(), 0.3) == [pytest.approx(0.3)]
        sq = preimages(BlaschkeMap([0, 0]), 0.25)
        assert sq == [pytest.approx(-0.5), pytest.approx(0.5)]
        zs = preimages(BlaschkeMap([0, -0.8]), 0)
        assert zs == [pytest.approx(-0.8), pytest.approx(0, abs=1e-15)]

    @given(st.lists(disc_points, min_size=1, max_size=6), disc_points)
    def test_fiber_property(self, zeros, w):
        g = BlaschkeMap(zeros)
        try:
            roots = preimages(g, w)
        except orbitrel.NonConvergentError:
            # only near critical values, where the fiber is ill-conditioned
            crit = g.critical_values()
            assert crit.size and np.min(np.abs(crit - w)) < 1e-3
            return
        assert len(roots) == g.degree
        assert all(abs(z) < 1 for z in roots)
        assert max(abs(g(z) - w) for z in roots) < 1e-9

    def test_domain_and_cap(self):
        with pytest.raises(DomainError):
            preimages(BlaschkeMap([0.2]), 1.0)
        with pytest.raises(DomainError):
            preimages(BlaschkeMap([0.0] * 65), 0.1)

    def test_scaled_map_keeps_disc_roots(self):
        g = BlaschkeMap([0, 0], scale=0.5)
        roots = preimages(g, 0.125)
        assert len(roots) == 2
        assert all(abs(g(z) - 0.125) < 1e-12 for z in roots)


class TestSample:
    def test_rotation_tower(self):
        s = grand_orbit_sample(MapSequence.constant(BlaschkeMap.rotation_map(0.3)), 0.4 + 0.1j, 5)
        assert s.count == 1 and s.points[0] == 0.4 + 0.1j
        assert s.min_gap == math.inf

    def test_squaring_depth_three(self):
        s = grand_orbit_sample(SQUARING, 0.5, 3)
        assert s.count == 8
        assert np.allclose(np.abs(s.points) ** 8, 0.5**8)
        adjacent = hypgeo.hyp_dist(0.5, 0.5 * cmath.exp(2j * math.pi / 8))
        assert s.min_gap == pytest.approx(adjacent, rel=1e-12)
        assert 0.5 in s.points

    def test_squaring_deep_no_underflow(self):
        s = grand_orbit_sample(SQUARING, 0.5, 12)
        assert s.count == 4096
        assert s.min_gap == pytest.approx(hypgeo.hyp_dist(0.5, 0.5 * cmath.exp(2j * math.pi / 4096)), rel=1e-9)

    @pytest.mark.parametrize("depth", [1, 3, 5, 7])
    def test_fiber_count(self, depth):
        s = grand_orbit_sample(KOENIGS, 0.2, depth)
        assert s.count == 2**depth
        cubic = MapSequence.constant(BlaschkeMap([0, 0.4j, -0.5]))
        assert grand_orbit_sample(cubic, 0.1, min(depth, 4)).count == 3 ** min(depth, 4)

    def test_pullback_soundness(self):
        for seq, base in ((KOENIGS, 0.2), (MapSequence.parametric(), 0.3 + 0.1j)):
            k = 6
            s = grand_orbit_sample(seq, base, k)
            block = compose_block(seq, 0, k)
            target = block(base)
            assert np.max(np.abs(block(s.points) - target)) < 1e-8
            assert base in s.points

    def test_min_gap_matches_brute_force(self):
        s = grand_orbit_sample(KOENIGS, 0.2, 5)
        inside = [z for z in s.points if abs(z) < orbitrel.REFERENCE_RADIUS]
        assert s.min_gap == pytest.approx(min_pair_distance_brute(inside), rel=1e-9)

    def test_koenigs_floor_stable(self):
        gaps = [grand_orbit_sample(KOENIGS, 0.2, k).min_gap for k in range(4, 9)]
        assert min(gaps) > 1e-3

    def test_deterministic_order(self):
        a = grand_orbit_sample(KOENIGS, 0.2, 6).points
        b = grand_orbit_sample(KOENIGS, 0.2, 6).points
        assert np.array_equal(a, b)
        keys = list(zip(a.real, a.imag))
        assert keys == sorted(keys)

    def test_cap(self):
        s = grand_orbit_sample(KOENIGS, 0.2, 12, cap=1000)
        assert s.truncated and "cap" in s.reason
        assert s.count <= 1000
        s = grand_orbit_sample(SQUARING, 0.5, 30, cap=1000)
        assert s.truncated and s.count <= 1000

    def test_explicit_horizon(self):
        seq = MapSequence.explicit([BlaschkeMap.koenigs_pair(0.5)] * 3)
        s = grand_orbit_sample(seq, 0.2, 5)
        assert s.truncated and s.count == 8

    def test_indiscreteness_monotone_for_powers(self):
        gaps = [grand_orbit_sample(SQUARING, 0.6, k).min_gap for k in range(1, 12)]
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))

    def test_dedupe(self):
        pts = orbitrel.dedupe([0.1, 0.1 + 1e-12, 0.2, 0.1 + 1e-12j])
        assert len(pts) == 2


class TestGrandOrbitSeparation:
    def test_phi_constant_on_fibers(self):
        s = grand_orbit_sample(KOENIGS, 0.2, 5)
        phi, ok = linearize.evaluate_phi(KOENIGS, 0, s.points)
        assert ok
        assert np.max(np.abs(phi - phi[0])) < 1e-8

    def test_phi_separates_orbits(self):
        a = grand_orbit_sample(KOENIGS, 0.2, 3).points
        b = grand_orbit_sample(KOENIGS, 0.25 + 0.05j, 3).points
        pa, _ = linearize.evaluate_phi(KOENIGS, 0, a)
        pb, _ = linearize.evaluate_phi(KOENIGS, 0, b)
        assert np.min(np.abs(pa[:, None] - pb[None, :])) > 1e-3


class TestDetect:
    def test_isometric_tail(self):
        seq = MapSequence.rotation_tail([BlaschkeMap.koenigs_pair(0.5)] * 2, 0.4)
        v = discreteness_detect(seq)
        assert v.verdict is Relation.DISCRETE and v.structural

    def test_power_tail(self):
        v = discreteness_detect(SQUARING)
        assert v.verdict is Relation.INDISCRETE and v.structural

    def test_power_tower(self):
        t = CoveringTower(ANNULUS, DegreeRule.constant(2), 0.3)
        v = discreteness_detect(t)
        assert v.verdict is Relation.INDISCRETE and v.structural
        assert v.evidence["angular_gaps"][-1] == 2 * math.pi / 2**10
        t1 = CoveringTower(ANNULUS, DegreeRule.constant(1), 0.3)
        assert discreteness_detect(t1).verdict is Relation.DISCRETE

    def test_lambda_floor(self):
        v = discreteness_detect(KOENIGS)
        assert v.verdict is Relation.DISCRETE and v.structural

    def test_explicit_prefix(self):
        seq = MapSequence.explicit([BlaschkeMap.koenigs_pair(0.5)] * 5)
        v = discreteness_detect(seq, 0.2)
        assert v.verdict is Relation.UNDETERMINED and not v.structural
        assert v.evidence["depths"] == [4]

    def test_heuristic_agrees_with_theorems(self):
        assert discreteness_detect(KOENIGS, 0.2, structural=False).verdict is Relation.DISCRETE
        assert discreteness_detect(SQUARING, 0.5, structural=False).verdict is Relation.INDISCRETE

    def test_schedule_validation(self):
        with pytest.raises(DomainError):
            discreteness_detect(KOENIGS, 0.2, (6, 4))
