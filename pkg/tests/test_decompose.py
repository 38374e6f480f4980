import json

import numpy as np
import pytest

from spantree.decompose import (
    DecompositionError,
    check_decomposition,
    decompose,
)
from spantree.embedder import stars_from_decomposition
from spantree.params import ParamSchedule
from spantree.trees import OrientedTree, gen_random_tree


def schedule(n, eta=0.08, k=12, K=None):
    return ParamSchedule(alpha=0.25, eta=eta, k=k, K=K or max(60, n // 3), strip_eps=0.02)


class TestLongPath:
    def test_paths_absorb_everything(self):
        n = 10_000
        tree = gen_random_tree(n, 1, "path", np.random.default_rng(0))
        params = ParamSchedule(alpha=0.25, eta=0.01, k=50, K=5000, strip_eps=0.02)
        td = decompose(tree, 0, params)
        assert len(td.t0) <= 100
        assert len(td.t2) == n  # T2 = T: the pieces absorb the whole path
        assert check_decomposition(td) == []

    def test_layers_nested(self):
        tree = gen_random_tree(400, 1, "path", np.random.default_rng(1))
        td = decompose(tree, 0, schedule(400))
        assert set(td.t0) <= set(td.t1) <= set(td.t2)


class TestStarTree:
    def test_star_becomes_t1(self):
        n = 200
        tree = OrientedTree(n, [(0, v) for v in range(1, n)], t=0)
        td = decompose(tree, 0, schedule(n, K=60))
        assert len(td.t1) == n
        assert not td.pieces
        assert check_decomposition(td) == []

    def test_star_rooted_at_leaf(self):
        n = 100
        tree = OrientedTree(n, [(0, v) for v in range(1, n)], t=5)
        td = decompose(tree, 5, schedule(n, K=60))
        assert 5 in set(td.t0.tolist())
        assert len(td.t1) == n


class TestValidator:
    def test_families_all_pass(self):
        for family in ("uniform", "path", "caterpillar", "spider", "broom"):
            for n in (300, 800):
                for seed in range(3):
                    tree = gen_random_tree(n, 3, family, np.random.default_rng(seed))
                    td = decompose(tree, 0, schedule(n))
                    assert check_decomposition(td) == [], (family, n, seed)

    def test_monte_carlo_uniform(self):
        params = ParamSchedule(alpha=0.25, eta=0.05, k=12, K=600, strip_eps=0.02)
        for seed in range(25):
            tree = gen_random_tree(2000, 3, "uniform", np.random.default_rng(seed))
            td = decompose(tree, 0, params)
            assert check_decomposition(td) == []

    def test_piece_structure(self):
        tree = gen_random_tree(600, 1, "path", np.random.default_rng(2))
        td = decompose(tree, 0, schedule(600))
        assert td.pieces
        for p in td.pieces:
            assert td.k <= len(p.body) <= td.K
            for mid in (p.mid_x, p.mid_y):
                t2 = set(td.t2.tolist())
                assert len([u for u in tree.nbrs(mid) if u in t2]) == 2

    def test_too_tight_schedule_reports_property(self):
        tree = gen_random_tree(9, 1, "path", np.random.default_rng(0))
        with pytest.raises(DecompositionError) as exc:
            decompose(tree, 0, ParamSchedule(alpha=0.25, eta=0.1, k=12, K=60))
        assert any("P1" in p for p in exc.value.failed)

    def test_k_floor(self):
        tree = gen_random_tree(100, 1, "path", np.random.default_rng(0))
        with pytest.raises(ValueError):
            decompose(tree, 0, ParamSchedule(alpha=0.25, k=6, K=60))

    def test_t_always_in_t0(self):
        for seed in range(5):
            tree = gen_random_tree(300, 3, "uniform", np.random.default_rng(seed))
            t = int(np.random.default_rng(seed).integers(300))
            td = decompose(tree, t, schedule(300))
            assert t in set(td.t0.tolist())


class TestStarsExtraction:
    def test_components_match_layers(self):
        tree = gen_random_tree(500, 3, "uniform", np.random.default_rng(3))
        td = decompose(tree, 0, schedule(500))
        stars = stars_from_decomposition(td)
        star_vertices = {v for st in stars for v in st.vertices}
        assert star_vertices == set(td.t1.tolist()) - set(td.t0.tolist())
        for st in stars:
            assert st.root in tree.nbrs(st.attach) or st.attach in tree.nbrs(st.root)
            assert st.root in tree.adj(st.attach, st.sign)


class TestDump:
    def test_json_round_readable(self):
        tree = gen_random_tree(300, 3, "uniform", np.random.default_rng(4))
        td = decompose(tree, 0, schedule(300))
        doc = json.loads(td.to_json())
        assert doc["n"] == 300
        assert sorted(doc["t0"]) == td.t0.tolist()
        assert set(map(int, doc["stars"])) <= set(td.t0.tolist())

    def test_dump_deterministic(self):
        tree = gen_random_tree(300, 3, "uniform", np.random.default_rng(4))
        a = decompose(tree, 0, schedule(300)).to_json()
        b = decompose(tree, 0, schedule(300)).to_json()
        assert a == b

    def test_golden_file(self):
        from pathlib import Path

        tree = gen_random_tree(60, 2, "path", np.random.default_rng(12))
        params = ParamSchedule(alpha=0.25, eta=0.1, k=8, K=30, strip_eps=0.02)
        td = decompose(tree, 0, params)
        golden = Path(__file__).parent / "data" / "decomposition_golden.json"
        assert td.to_json() + "\n" == golden.read_text()
