import numpy as np
import pytest

from spantree.decompose import decompose
from spantree.digraph import Digraph, Sign, gen_semidegree_digraph
from spantree.embedder import (
    AbsorptionError,
    PhaseFailure,
    attach_path_trees,
    build_absorber,
    complete_absorption,
    embed_almost_spanning,
    embed_core_with_leaf_sets,
    embed_spanning,
    embed_stars,
    stars_from_decomposition,
    StarComponent,
)
from spantree.embedding import is_valid_embedding
from spantree.guides import GuideSystem
from spantree.oracle import verify_embedding
from spantree.params import ParamSchedule, almost_defaults, spanning_defaults
from spantree.trees import OrientedTree, gen_random_tree, induced_subtree


def complete(n):
    mat = np.ones((n, n), dtype=bool)
    np.fill_diagonal(mat, False)
    return Digraph(n, mat)


class TestCoreWithLeafSets:
    def test_single_vertex_single_leaf(self):
        d = complete(30)
        tree = OrientedTree(2, [(0, 1)], t=0)
        rng = np.random.default_rng(0)
        v0 = np.arange(0, 10)
        part = np.arange(10, 20)
        system = GuideSystem(d, eps=0.2, eta=1.0, mu=0.2, alpha=0.45)
        system.restrict(v0, [part], mu_count=4, direct=True)
        emb, audits = embed_core_with_leaf_sets(
            d, tree, {0}, [([1], Sign.PLUS)], [v0, part], 3, system, rng
        )
        assert emb[0] == 3
        assert emb[1] in set(part.tolist())
        assert audits[0].matched

    def test_core_lands_in_v0_and_leaves_in_parts(self):
        rng = np.random.default_rng(1)
        d = gen_semidegree_digraph(200, 0.3, rng)
        # a 6-vertex core path with 8 out-leaves and 6 in-leaves
        edges = [(i, i + 1) for i in range(5)]
        nxt = 6
        out_leaves, in_leaves = [], []
        for i in range(8):
            edges.append((i % 6, nxt)); out_leaves.append(nxt); nxt += 1
        for i in range(6):
            edges.append((nxt, i % 6)); in_leaves.append(nxt); nxt += 1
        tree = OrientedTree(nxt, edges, t=0)
        v0 = np.arange(0, 60)
        p1 = np.arange(60, 90)
        p2 = np.arange(90, 120)
        system = GuideSystem(d, eps=0.3, eta=1.0, mu=0.2, alpha=0.3)
        system.restrict(v0, [p1, p2], mu_count=14, direct=True)
        emb, audits = embed_core_with_leaf_sets(
            d, tree, set(range(6)),
            [(out_leaves, Sign.PLUS), (in_leaves, Sign.MINUS)],
            [v0, p1, p2], 5, system, rng,
        )
        assert is_valid_embedding(d, tree, emb)
        for v in range(6):
            assert emb[v] < 60
        for v in out_leaves:
            assert 60 <= emb[v] < 90
        for v in in_leaves:
            assert 90 <= emb[v] < 120


class TestCoreMonteCarlo:
    def test_out_leaf_core_rate(self):
        # random core with out-leaf parts: most seeds succeed within the
        # direct call (no retries here)
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            d = gen_semidegree_digraph(400, 0.3, rng)
            core_n = 25
            edges = [(i, i + 1) for i in range(core_n - 1)]
            leaves = []
            nxt = core_n
            for i in range(40):
                edges.append((i % core_n, nxt))
                leaves.append(nxt)
                nxt += 1
            tree = OrientedTree(nxt, edges, t=0)
            v0 = np.arange(0, 150)
            part = np.arange(150, 210)
            system = GuideSystem(d, eps=0.2, eta=1.0, mu=0.3, alpha=0.3)
            try:
                system.restrict(v0, [part], mu_count=45, direct=True)
                emb, _ = embed_core_with_leaf_sets(
                    d, tree, set(range(core_n)), [(leaves, Sign.PLUS)],
                    [v0, part], 3, system, rng,
                )
                wins += is_valid_embedding(d, tree, emb)
            except Exception:
                pass
        assert wins >= 16


class TestEmbedStars:
    def test_single_vertex_out_leaves(self):
        # all stars single vertices attached as out-leaves
        d = complete(120)
        edges = [(i, i + 1) for i in range(4)]
        stars = []
        nxt = 5
        for i in range(30):
            edges.append((i % 5, nxt))
            stars.append(StarComponent(attach=i % 5, root=nxt, sign=Sign.PLUS,
                                       vertices=(nxt,)))
            nxt += 1
        tree = OrientedTree(nxt, edges, t=0)
        params = ParamSchedule(alpha=0.45, retries=6)
        emb = embed_stars(d, tree, set(range(5)), stars, 0, 7, params,
                          np.random.default_rng(2))
        assert is_valid_embedding(d, tree, emb)
        assert emb[0] == 7

    def test_multi_vertex_star_bodies(self):
        rng = np.random.default_rng(3)
        d = gen_semidegree_digraph(300, 0.3, rng)
        edges = [(i, i + 1) for i in range(9)]
        nxt = 10
        stars = []
        for i in range(25):
            root = nxt
            edges.append((i % 10, root)); nxt += 1
            body = [root]
            for _ in range(i % 3):
                edges.append((body[-1], nxt)); body.append(nxt); nxt += 1
            stars.append(StarComponent(attach=i % 10, root=root, sign=Sign.PLUS,
                                       vertices=tuple(body)))
        tree = OrientedTree(nxt, edges, t=0)
        params = ParamSchedule(alpha=0.3, retries=8)
        emb = embed_stars(d, tree, set(range(10)), stars, 0, 11, params, rng)
        assert is_valid_embedding(d, tree, emb)
        assert emb[0] == 11

    def test_many_small_stars_rate(self):
        # many stars of <= 5 vertices on a small core: high success rate
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            d = gen_semidegree_digraph(500, 0.3, rng)
            core_n = 20
            edges = [(i, i + 1) for i in range(core_n - 1)]
            stars = []
            nxt = core_n
            for i in range(100):
                root = nxt
                sign = Sign.PLUS if i % 3 else Sign.MINUS
                attach = i % core_n
                edges.append((attach, root) if sign is Sign.PLUS else (root, attach))
                body = [root]
                nxt += 1
                for _ in range(i % 4):
                    edges.append((body[-1], nxt))
                    body.append(nxt)
                    nxt += 1
                stars.append(StarComponent(attach=attach, root=root, sign=sign,
                                           vertices=tuple(body)))
            tree = OrientedTree(nxt, edges, t=0)
            params = ParamSchedule(alpha=0.3, retries=6)
            try:
                emb = embed_stars(d, tree, set(range(core_n)), stars, 0, 7, params, rng)
                wins += is_valid_embedding(d, tree, emb) and emb[0] == 7
            except PhaseFailure:
                pass
        assert wins >= 15

    def test_sizing_audit_fits_host(self):
        # arithmetic postcondition: parts plus pool plus core fit the host
        rng = np.random.default_rng(4)
        d = gen_semidegree_digraph(250, 0.3, rng)
        tree = gen_random_tree(150, 3, "uniform", rng)
        params = almost_defaults(250, 0.3, 0.2)
        td = decompose(tree, 0, params)
        stars = stars_from_decomposition(td)
        emb = embed_stars(d, tree, {int(x) for x in td.t0}, stars, 0, 9, params, rng)
        embedded = set(td.t0.tolist()) | {v for st in stars for v in st.vertices}
        assert set(emb.map) == embedded
        assert len(emb.used) == len(embedded) <= d.n


class TestAttachPathTrees:
    def test_smallest_legal_piece(self):
        # oriented path r -> r' -> mid -> s' -> s: both connectors from one
        # triple intersection each
        d = complete(60)
        piece_tree = OrientedTree(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        piece = induced_subtree(piece_tree, range(5))
        params = ParamSchedule(alpha=0.45, beta=0.2, retries=5)
        maps = attach_path_trees(d, [(piece, 0, 4)], [(3, 9)], params,
                                 np.random.default_rng(0))
        m = maps[0]
        assert m[0] == 3 and m[4] == 9
        for u, w in piece_tree.edge_list:
            assert d.has_edge(m[u], m[w])

    def test_anchors_on_complete_digraph(self):
        d = complete(100)
        rng = np.random.default_rng(1)
        pieces, anchors = [], []
        host = 0
        for i in range(4):
            tree = gen_random_tree(12, 3, "uniform", np.random.default_rng(i))
            leaves = [v for v in range(12) if tree.degree(v) == 1
                      and tree.degree(tree.nbrs(v)[0]) == 2]
            if len(leaves) < 2:
                continue
            piece = induced_subtree(tree, range(12))
            pieces.append((piece, leaves[0], leaves[1]))
            anchors.append((host, host + 1))
            host += 2
        params = ParamSchedule(alpha=0.45, beta=0.15, retries=5)
        maps = attach_path_trees(d, pieces, anchors, params, rng)
        used = set()
        for (piece, r, s), (a, b), m in zip(pieces, anchors, maps):
            assert m[r] == a and m[s] == b
            for u, w in piece.tree.edge_list:
                assert d.has_edge(m[u], m[w])
            body = {h for v, h in m.items() if v not in (r, s)}
            assert not (body & used)
            used |= body

    def test_many_pieces_rate(self):
        # pieces of size 10..40 with prescribed distinct anchors
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            d = gen_semidegree_digraph(500, 0.3, rng)
            pieces, anchors = [], []
            host = 0
            for i in range(10):
                size = 10 + (7 * i) % 31
                base = gen_random_tree(size, 2, "path", np.random.default_rng(100 + i))
                piece = induced_subtree(base, range(size))
                pieces.append((piece, 0, size - 1))
                anchors.append((host, host + 1))
                host += 2
            params = ParamSchedule(alpha=0.3, beta=0.08, retries=6)
            try:
                maps = attach_path_trees(d, pieces, anchors, params, rng)
            except PhaseFailure:
                continue
            ok = True
            used = set()
            for (piece, r, s), (a, b), m in zip(pieces, anchors, maps):
                ok &= m[r] == a and m[s] == b
                ok &= all(d.has_edge(m[u], m[w]) for u, w in piece.tree.edge_list)
                body = {h for v, h in m.items() if v not in (r, s)}
                ok &= not (body & used)
                used |= body
            wins += ok
        assert wins >= 17

    def test_distinct_anchor_requirement(self):
        d = complete(30)
        piece_tree = OrientedTree(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        piece = induced_subtree(piece_tree, range(5))
        params = ParamSchedule(alpha=0.45, retries=3)
        with pytest.raises(ValueError):
            attach_path_trees(d, [(piece, 0, 4), (piece, 0, 4)],
                              [(1, 2), (2, 3)], params, np.random.default_rng(0))


class TestAlmostSpanning:
    def test_single_vertex_tree(self):
        d = complete(20)
        tree = OrientedTree(1, [], t=0)
        params = almost_defaults(20, 0.4, 0.2)
        emb, _ = embed_almost_spanning(d, tree, 0, 13, params, np.random.default_rng(0))
        assert emb[0] == 13

    def test_directed_path(self):
        rng = np.random.default_rng(5)
        d = gen_semidegree_digraph(300, 0.3, rng)
        tree = gen_random_tree(240, 1, "path", rng)
        params = almost_defaults(300, 0.3, 0.2)
        emb, _ = embed_almost_spanning(d, tree, 0, 7, params, rng)
        assert verify_embedding(d, tree, emb)
        assert emb[0] == 7

    def test_families_on_random_hosts(self):
        for seed, family in enumerate(("uniform", "caterpillar", "spider")):
            rng = np.random.default_rng(seed)
            d = gen_semidegree_digraph(350, 0.25, rng)
            tree = gen_random_tree(280, 3, family, rng)
            params = almost_defaults(350, 0.25, 0.2)
            emb, _ = embed_almost_spanning(d, tree, 0, 3, params, rng)
            assert verify_embedding(d, tree, emb)
            assert emb[0] == 3

    def test_broad_star_with_raised_cap(self):
        rng = np.random.default_rng(6)
        n = 300
        d = gen_semidegree_digraph(n, 0.3, rng)
        size = int(0.7 * n)
        tree = OrientedTree(size, [(0, v) for v in range(1, size)], t=0)
        params = almost_defaults(n, 0.3, 0.3).with_updates(max_tree_semidegree=size)
        emb, _ = embed_almost_spanning(d, tree, 0, 5, params, rng)
        assert verify_embedding(d, tree, emb)

    def test_too_full_rejected(self):
        d = complete(20)
        tree = gen_random_tree(19, 3, "uniform", np.random.default_rng(0))
        with pytest.raises(ValueError):
            embed_almost_spanning(d, tree, 0, 0, almost_defaults(20, 0.4, 0.1),
                                  np.random.default_rng(0))


class TestAbsorber:
    def test_complete_host_margin(self):
        d = complete(300)
        params = spanning_defaults(300, 0.45)
        tree = gen_random_tree(params.absorber_size(300), 3, "uniform",
                               np.random.default_rng(1)).with_t(0)
        state = build_absorber(d, tree, 0, params, np.random.default_rng(2))
        # on a complete host every index switches for every pair
        assert state.threshold <= len(state.hosts)
        assert len(state.a_set) == tree.n - params.absorb_gap(300)
        assert state.anchor_host in set(state.a_set.tolist())

    def test_tiny_rest_precondition(self):
        d = complete(40)
        params = spanning_defaults(40, 0.45)
        tree = gen_random_tree(5, 3, "uniform", np.random.default_rng(0))
        with pytest.raises(ValueError):
            build_absorber(d, tree, 0, params, np.random.default_rng(0))

    def test_completion_deterministic_given_s(self):
        rng = np.random.default_rng(3)
        d = gen_semidegree_digraph(400, 0.25, rng)
        params = spanning_defaults(400, 0.25)
        tree = gen_random_tree(params.absorber_size(400), 3, "uniform", rng).with_t(0)
        state = build_absorber(d, tree, 0, params, rng)
        free = np.array(sorted(set(range(400)) - set(state.a_set.tolist())))
        extra = rng.choice(free, size=tree.n - len(state.a_set), replace=False)
        b = np.array(sorted(set(state.a_set.tolist()) | {int(x) for x in extra}))
        emb = complete_absorption(state, b)
        assert verify_embedding(d, tree, emb)
        assert emb[0] == state.anchor_host
        assert set(emb.used) == set(b.tolist())

    def test_completion_requires_a_subset(self):
        d = complete(200)
        params = spanning_defaults(200, 0.45)
        tree = gen_random_tree(params.absorber_size(200), 3, "uniform",
                               np.random.default_rng(4)).with_t(0)
        state = build_absorber(d, tree, 0, params, np.random.default_rng(5))
        bad = np.arange(tree.n)  # ignores A entirely
        with pytest.raises(ValueError):
            complete_absorption(state, bad)


class TestSpanning:
    def test_complete_host_any_tree(self):
        d = complete(200)
        tree = gen_random_tree(200, 3, "uniform", np.random.default_rng(0))
        params = spanning_defaults(200, 0.45)
        emb, tele = embed_spanning(d, tree, params, np.random.default_rng(1))
        assert verify_embedding(d, tree, emb)
        assert len(emb.used) == 200

    def test_random_host_families(self):
        for seed, family in enumerate(("uniform", "path")):
            rng = np.random.default_rng(seed)
            d = gen_semidegree_digraph(400, 0.25, rng)
            tree = gen_random_tree(400, 3, family, rng)
            params = spanning_defaults(400, 0.25)
            emb, _ = embed_spanning(d, tree, params, rng)
            assert verify_embedding(d, tree, emb)
            assert len(emb.used) == 400

    def test_size_mismatch(self):
        d = complete(50)
        tree = gen_random_tree(40, 3, "uniform", np.random.default_rng(0))
        with pytest.raises(ValueError):
            embed_spanning(d, tree, spanning_defaults(50, 0.4), np.random.default_rng(0))

    def test_degree_cap_enforced(self):
        d = complete(100)
        star = OrientedTree(100, [(0, v) for v in range(1, 100)], t=0)
        with pytest.raises(ValueError, match="cap"):
            embed_spanning(d, star, spanning_defaults(100, 0.45), np.random.default_rng(0))

    def test_complete_host_star_with_raised_cap(self):
        # any tree embeds in a complete host once the cap admits it
        n = 200
        d = complete(n)
        star = OrientedTree(n, [(0, v) for v in range(1, n)], t=0)
        params = spanning_defaults(n, 0.45).with_updates(max_tree_semidegree=n)
        emb, _ = embed_spanning(d, star, params, np.random.default_rng(1))
        assert verify_embedding(d, star, emb) and len(emb.used) == n

    def test_debug_audits_path(self, monkeypatch):
        monkeypatch.setenv("ALG_DEBUG_AUDITS", "1")
        rng = np.random.default_rng(11)
        d = gen_semidegree_digraph(200, 0.25, rng)
        params = spanning_defaults(200, 0.25)
        tree = gen_random_tree(params.absorber_size(200), 3, "uniform", rng).with_t(0)
        state = build_absorber(d, tree, 0, params, rng)
        free = np.array(sorted(set(range(200)) - set(state.a_set.tolist())))
        extra = rng.choice(free, size=tree.n - len(state.a_set), replace=False)
        b = np.array(sorted(set(state.a_set.tolist()) | {int(x) for x in extra}))
        emb = complete_absorption(state, b)
        assert verify_embedding(d, tree, emb)

    def test_phase_disjointness(self):
        rng = np.random.default_rng(7)
        d = gen_semidegree_digraph(400, 0.25, rng)
        tree = gen_random_tree(400, 3, "uniform", rng)
        emb, _ = embed_spanning(d, tree, spanning_defaults(400, 0.25), rng)
        phases = {}
        for tv, ph in emb.phase.items():
            phases.setdefault(ph, set()).add(emb[tv])
        # absorber image and almost image overlap only at the anchor
        almost = set().union(*(phases.get(p, set()) for p in ("almost",)))
        absorber = phases.get("absorber", set())
        assert len(almost & absorber) == 0
