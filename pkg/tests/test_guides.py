import json
import math

import numpy as np
import pytest

from spantree.digraph import Digraph, SIGNS, Sign, gen_semidegree_digraph, sample_disjoint_subsets
from spantree.guides import (
    GuideBuildError,
    GuideRestrictError,
    GuideSystem,
    build_guide,
    build_xy_labeling,
    restrict_guides,
)
from spantree.matching import is_skew_bounded


def complete(n):
    mat = np.ones((n, n), dtype=bool)
    np.fill_diagonal(mat, False)
    return Digraph(n, mat)


def two_dense_halves(n):
    """Two complete halves with no edges between them: semidegree < n/2."""
    mat = np.zeros((n, n), dtype=bool)
    h = n // 2
    mat[:h, :h] = True
    mat[h:, h:] = True
    np.fill_diagonal(mat, False)
    return Digraph(n, mat)


class TestXYLabeling:
    def test_complete_identity(self):
        d = complete(20)
        lab = build_xy_labeling(d, 0, Sign.PLUS, 0.2)
        assert (lab.xs == lab.ys).all()
        assert lab.verify(d)

    def test_generated_all_intersections_large(self):
        rng = np.random.default_rng(2)
        d = gen_semidegree_digraph(400, 0.25, rng)
        lab = build_xy_labeling(d, 11, Sign.MINUS, 0.25)
        assert lab.threshold == math.ceil(0.25**2 * 400)
        base = d.adj_row(11, Sign.MINUS)
        for x, y in zip(lab.xs, lab.ys):
            assert (d.mat[:, x] & base & d.mat[y]).sum() >= lab.threshold

    def test_split_host_reports_violation(self):
        d = two_dense_halves(40)
        with pytest.raises(GuideBuildError):
            build_xy_labeling(d, 0, Sign.PLUS, 0.25)


class TestBuildGuide:
    def test_exact_counts_and_skew(self):
        rng = np.random.default_rng(7)
        d = gen_semidegree_digraph(500, 0.3, rng)
        eps, eta, mu = 0.02, 0.5, 0.04
        entry = build_guide(d, 5, Sign.PLUS, eps, eta, mu, alpha=0.3)
        size, per_row = math.ceil(mu * 500), math.ceil(eps * 500)
        assert len(entry.guide) == size
        assert int(entry.hplus.sum()) == size * per_row
        assert int(entry.hminus.sum()) == size * per_row
        bound = math.ceil((1 + eta) * mu * eps * 500)
        for circ in SIGNS:
            assert is_skew_bounded(entry.pattern(circ), per_row, bound)

    def test_guide_set_inside_neighborhood(self):
        rng = np.random.default_rng(8)
        d = gen_semidegree_digraph(300, 0.25, rng)
        entry = build_guide(d, 17, Sign.MINUS, 0.05, 0.5, 0.05, alpha=0.25)
        base = d.adj_row(17, Sign.MINUS)
        assert base[entry.guide].all()

    def test_single_round(self):
        d = complete(60)
        entry = build_guide(d, 0, Sign.PLUS, 0.1, 0.5, 1 / 60, alpha=0.4)
        assert len(entry.guide) == 1
        assert int(entry.hplus.sum()) == math.ceil(0.1 * 60)

    def test_edges_are_host_edges(self):
        rng = np.random.default_rng(9)
        d = gen_semidegree_digraph(200, 0.2, rng)
        entry = build_guide(d, 3, Sign.PLUS, 0.06, 0.5, 0.06, alpha=0.2)
        rows, xs = np.nonzero(entry.hplus)
        assert d.mat[entry.guide[rows], xs].all()
        rows, ys = np.nonzero(entry.hminus)
        assert d.mat[ys, entry.guide[rows]].all()

    def test_debug_dump_json(self):
        d = complete(40)
        entry = build_guide(d, 1, Sign.PLUS, 0.1, 0.5, 0.1, alpha=0.4)
        doc = json.loads(entry.debug_dump())
        assert doc["v"] == 1
        assert len(doc["guide_set"]) == len(entry.guide)
        assert len(doc["hplus_back_degrees"]) == 40


class TestRestriction:
    def test_complete_host_always_succeeds(self):
        d = complete(120)
        rng = np.random.default_rng(0)
        system = GuideSystem(d, eps=0.1, eta=1.0, mu=0.2, alpha=0.45)
        v0, part = sample_disjoint_subsets(d, [40, 60], rng)
        restrict_guides(system, v0, [part], mu_count=12,
                        probe=[(0, Sign.PLUS), (0, Sign.MINUS)])
        entry = system.get(0, Sign.PLUS)
        assert len(entry.guide) == 12

    def test_trimmed_size_exact(self):
        rng = np.random.default_rng(4)
        d = gen_semidegree_digraph(300, 0.3, rng)
        system = GuideSystem(d, eps=0.08, eta=1.0, mu=0.25, alpha=0.3)
        v0, part = sample_disjoint_subsets(d, [90, 150], rng)
        system.restrict(v0, [part], mu_count=15)
        entry = system.get(4, Sign.PLUS)
        assert len(entry.guide) == 15
        in_v0 = np.zeros(300, dtype=bool)
        in_v0[v0] = True
        assert in_v0[entry.guide].all()

    def test_direct_mode_builds_inside_v0(self):
        rng = np.random.default_rng(5)
        d = gen_semidegree_digraph(300, 0.3, rng)
        system = GuideSystem(d, eps=0.12, eta=1.0, mu=0.25, alpha=0.3)
        v0, part = sample_disjoint_subsets(d, [100, 120], rng)
        system.restrict(v0, [part], mu_count=20, direct=True)
        entry = system.get(9, Sign.MINUS)
        assert len(entry.guide) == 20
        in_v0 = np.zeros(300, dtype=bool)
        in_v0[v0] = True
        assert in_v0[entry.guide].all()
        base = d.adj_row(9, Sign.MINUS)
        assert base[entry.guide].all()

    def test_q1_failure_reported(self):
        rng = np.random.default_rng(6)
        d = gen_semidegree_digraph(200, 0.25, rng)
        system = GuideSystem(d, eps=0.08, eta=1.0, mu=0.05, alpha=0.25)
        v0, part = sample_disjoint_subsets(d, [10, 100], rng)
        system.restrict(v0, [part], mu_count=10)  # |A| = 10 cannot all be in tiny V0
        with pytest.raises(GuideRestrictError):
            system.get(2, Sign.PLUS)

    def test_monte_carlo_restriction(self):
        # Trim-mode restriction with linear parts passes on most samples.
        rng = np.random.default_rng(11)
        d = gen_semidegree_digraph(300, 0.25, rng)
        good = 0
        system = GuideSystem(d, eps=0.1, eta=1.0, mu=0.3, alpha=0.25)
        for _ in range(20):
            v0, part = sample_disjoint_subsets(d, [90, 150], rng)
            try:
                restrict_guides(system, v0, [part], mu_count=18,
                                probe=[(5, Sign.PLUS), (5, Sign.MINUS)])
                good += 1
            except GuideRestrictError:
                pass
        assert good >= 17


class TestGuideSystemCaching:
    def test_raw_entries_cached(self):
        d = complete(80)
        system = GuideSystem(d, eps=0.1, eta=0.5, mu=0.1, alpha=0.4)
        a = system.raw(3, Sign.PLUS)
        b = system.raw(3, Sign.PLUS)
        assert a is b

    def test_restriction_resets_trims(self):
        d = complete(80)
        rng = np.random.default_rng(1)
        system = GuideSystem(d, eps=0.1, eta=1.0, mu=0.3, alpha=0.4)
        v0a, pa = sample_disjoint_subsets(d, [30, 40], rng)
        system.restrict(v0a, [pa], mu_count=8)
        first = system.get(2, Sign.PLUS)
        v0b, pb = sample_disjoint_subsets(d, [30, 40], rng)
        system.restrict(v0b, [pb], mu_count=8)
        second = system.get(2, Sign.PLUS)
        in_v0b = np.zeros(80, dtype=bool)
        in_v0b[v0b] = True
        assert in_v0b[second.guide].all()
        assert first is not second
