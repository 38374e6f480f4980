"""Directed bipartite matchings, Hall certificates, and matching-based embedding.

A pattern couples a left vertex class A with a right class B under a sign:
a PLUS pattern contains a row edge (a, b) when a->b is an edge, a MINUS
pattern when b->a is an edge.  Synthetic patterns (auxiliary graphs built
from guide rows) supply the incidence matrix directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .digraph import Digraph, Sign
from .embedding import Embedding
from .trees import OrientedTree, canonical_order, canonical_rooted_form, prefix_order


class MatchingError(RuntimeError):
    """A required matching does not exist; carries the Hall violator."""

    def __init__(self, message: str, violator: np.ndarray | None = None):
        super().__init__(message)
        self.violator = violator


@dataclass(frozen=True)
class BipartitePattern:
    """Left/right vertex classes and the boolean row-edge incidence."""

    left: np.ndarray       # labels of the left class
    right: np.ndarray      # labels of the right class
    sign: Sign
    adj: np.ndarray        # bool, len(left) x len(right)

    @classmethod
    def from_host(cls, d: Digraph, a, b, sign: Sign) -> "BipartitePattern":
        a = np.asarray(sorted(int(v) for v in a), dtype=np.int64)
        b = np.asarray(sorted(int(v) for v in b), dtype=np.int64)
        if len(np.intersect1d(a, b)) > 0:
            raise ValueError("pattern classes must be disjoint")
        if sign is Sign.PLUS:
            adj = d.mat[np.ix_(a, b)]
        else:
            adj = d.mat[np.ix_(b, a)].T
        return cls(a, b, sign, np.ascontiguousarray(adj))

    @classmethod
    def explicit(cls, left, right, sign: Sign, adj: np.ndarray) -> "BipartitePattern":
        left = np.asarray(left, dtype=np.int64)
        right = np.asarray(right, dtype=np.int64)
        adj = np.asarray(adj, dtype=bool)
        if adj.shape != (len(left), len(right)):
            raise ValueError("incidence shape mismatch")
        return cls(left, right, sign, adj)

    def row_degrees(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    def col_degrees(self) -> np.ndarray:
        return self.adj.sum(axis=0)


@dataclass(frozen=True)
class Matching:
    """Vertex-disjoint sign-edges from the left class into the right class."""

    pairs: tuple[tuple[int, int], ...]
    sign: Sign

    def __len__(self) -> int:
        return len(self.pairs)

    def as_dict(self) -> dict[int, int]:
        return {a: b for a, b in self.pairs}

    def dump(self) -> str:
        return "\n".join(f"{a} {b}" for a, b in sorted(self.pairs)) + "\n"


def _raw_matching(adj: np.ndarray) -> np.ndarray:
    """Row -> matched column (or -1), via augmenting paths in compiled code."""
    nl, nr = adj.shape
    if nl == 0 or nr == 0:
        return np.full(nl, -1, dtype=np.int64)
    sparse = csr_matrix(adj)
    col_of_row = np.full(nl, -1, dtype=np.int64)
    row_of_col = maximum_bipartite_matching(sparse, perm_type="column")
    # scipy returns, for each row, the matched column (or -1).
    col_of_row = row_of_col.astype(np.int64)
    return col_of_row


def max_matching(pattern: BipartitePattern) -> Matching:
    """Maximum-cardinality matching; deterministic for a fixed pattern."""
    col_of_row = _raw_matching(pattern.adj)
    pairs = tuple(
        (int(pattern.left[i]), int(pattern.right[j]))
        for i, j in enumerate(col_of_row)
        if j >= 0
    )
    return Matching(pairs, pattern.sign)


def _violator_rows(adj: np.ndarray, col_of_row: np.ndarray) -> np.ndarray:
    """Rows reachable by alternating paths from unmatched rows (Koenig set).

    When the matching misses some row, this set S satisfies |N(S)| < |S|.
    """
    nl, nr = adj.shape
    row_of_col = np.full(nr, -1, dtype=np.int64)
    for i, j in enumerate(col_of_row):
        if j >= 0:
            row_of_col[j] = i
    reach_rows = col_of_row < 0
    frontier = np.flatnonzero(reach_rows)
    seen_cols = np.zeros(nr, dtype=bool)
    while len(frontier) > 0:
        cols = adj[frontier].any(axis=0) & ~seen_cols
        seen_cols |= cols
        nxt = row_of_col[np.flatnonzero(cols)]
        nxt = nxt[nxt >= 0]
        nxt = nxt[~reach_rows[nxt]]
        reach_rows[nxt] = True
        frontier = nxt
    return np.flatnonzero(reach_rows)


def hall_violator(pattern: BipartitePattern) -> np.ndarray | None:
    """None if a matching covering A exists, else S with |N(S)| < |S|."""
    col_of_row = _raw_matching(pattern.adj)
    if (col_of_row >= 0).all():
        return None
    rows = _violator_rows(pattern.adj, col_of_row)
    violator = pattern.left[rows]
    nbhd = int(pattern.adj[rows].any(axis=0).sum())
    assert nbhd < len(violator), "Koenig extraction produced a non-violator"
    return violator


def covering_matching(pattern: BipartitePattern, what: str = "pattern") -> Matching:
    """Matching covering the left class, or MatchingError with the violator."""
    col_of_row = _raw_matching(pattern.adj)
    if not (col_of_row >= 0).all():
        rows = _violator_rows(pattern.adj, col_of_row)
        raise MatchingError(
            f"{what}: no matching covering the left class "
            f"(violator size {len(rows)}, neighborhood {int(pattern.adj[rows].any(axis=0).sum())})",
            violator=pattern.left[rows],
        )
    pairs = tuple(
        (int(pattern.left[i]), int(pattern.right[j])) for i, j in enumerate(col_of_row)
    )
    return Matching(pairs, pattern.sign)


def is_skew_bounded(pattern: BipartitePattern, a: float, b: float) -> bool:
    """Every left degree >= a and every right back-degree <= b."""
    if len(pattern.left) == 0:
        return True
    rows = pattern.row_degrees()
    cols = pattern.col_degrees()
    return bool(rows.min() >= a and (len(pattern.right) == 0 or cols.max() <= b))


def matching_from_skew(pattern: BipartitePattern, a: float, b: float) -> Matching:
    """Covering matching guaranteed by an (a, b, sign)-skew-bound with a >= b.

    A failure here is a bug or a false certificate, so it raises AssertionError
    rather than the retryable MatchingError.
    """
    if a < b:
        raise ValueError(f"skew matching needs a >= b, got a={a}, b={b}")
    if not is_skew_bounded(pattern, a, b):
        raise ValueError("pattern is not skew-bounded at the declared parameters")
    try:
        return covering_matching(pattern, what="skew-bounded pattern")
    except MatchingError as exc:  # pragma: no cover - would indicate a real bug
        raise AssertionError(
            f"skew-bounded pattern with a={a} >= b={b} failed Hall: {exc}"
        ) from exc


def find_perfect_matching(d: Digraph, a, b, sign: Sign) -> Matching:
    """Perfect sign-matching between equal-sized disjoint sets, or MatchingError."""
    pattern = BipartitePattern.from_host(d, a, b, sign)
    if len(pattern.left) != len(pattern.right):
        raise ValueError("perfect matching needs |A| == |B|")
    return covering_matching(pattern, what="perfect matching")


def embed_tree_copies(
    d: Digraph, tree: OrientedTree, root: int, v1: np.ndarray, v2: np.ndarray
) -> list[Embedding]:
    """|V1| vertex-disjoint copies of `tree`, each mapping `root` into V1.

    V2 is split into |tree|-1 equal blocks following a prefix order of the
    tree; consecutive blocks are joined by perfect sign-matchings, whose
    union decomposes into the copies.
    """
    v1 = np.asarray(v1, dtype=np.int64)
    v2 = np.asarray(v2, dtype=np.int64)
    per = len(v1)
    if len(v2) != (tree.n - 1) * per:
        raise ValueError(
            f"need |V2| = (|R|-1)|V1|: got {len(v2)} != {(tree.n - 1) * per}"
        )
    if tree.n == 1:
        out = []
        for h in v1:
            emb = Embedding()
            emb.assign(root, int(h), "copies")
            out.append(emb)
        return out

    order = prefix_order(tree, root)
    blocks = [v1] + [v2[i * per : (i + 1) * per] for i in range(tree.n - 1)]
    # host_of[i][b] = image of tree vertex order[i] in the copy rooted at v1[b]
    host_of = {0: blocks[0]}
    for i in range(1, tree.n):
        j = order.parent_index[i]
        sign = order.sign[i]
        try:
            matching = covering_matching(
                BipartitePattern.from_host(d, blocks[j], blocks[i], sign),
                what=f"tree-copy edge class {i}",
            )
        except MatchingError as exc:
            raise MatchingError(
                f"chained matching failed at edge class {i} "
                f"(tree vertex {order.order[i]}, sign {sign}): {exc}",
                violator=exc.violator,
            ) from exc
        lookup = matching.as_dict()
        host_of[i] = np.array([lookup[int(h)] for h in host_of[j]], dtype=np.int64)

    copies = []
    for b in range(per):
        emb = Embedding()
        for i in range(tree.n):
            emb.assign(order.order[i], int(host_of[i][b]), "copies")
        copies.append(emb)
    return copies


@dataclass
class ForestClass:
    """One isomorphism class of forest components."""

    rep: OrientedTree
    rep_root: int
    members: list[int] = field(default_factory=list)      # component indices
    member_maps: list[dict[int, int]] = field(default_factory=list)  # rep vtx -> member vtx


def _centroids(tree: OrientedTree) -> list[int]:
    """The one or two vertices minimizing the largest component of T - v."""
    if tree.n == 1:
        return [0]
    best = tree.n + 1
    out: list[int] = []
    size = _subtree_sizes(tree, 0)
    parent = size["parent"]
    sub = size["size"]
    for v in range(tree.n):
        worst = tree.n - sub[v]
        for u in tree.nbrs(v):
            if parent[u] == v:
                worst = max(worst, sub[u])
        if worst < best:
            best, out = worst, [v]
        elif worst == best:
            out.append(v)
    return out


def _subtree_sizes(tree: OrientedTree, root: int) -> dict:
    parent = [-1] * tree.n
    order = [root]
    for v in order:
        for u in tree.nbrs(v):
            if u != parent[v] and parent[u] == -1 and u != root:
                parent[u] = v
                order.append(u)
    size = [1] * tree.n
    for v in reversed(order):
        if parent[v] >= 0:
            size[parent[v]] += size[v]
    return {"parent": parent, "size": size}


def group_components(components: list[OrientedTree]) -> list[ForestClass]:
    """Group forest components by oriented isomorphism class.

    Each component is rooted at the centroid with the smaller canonical
    string, a choice invariant under isomorphism, so isomorphic components
    always join the same class with corresponding canonical orders.
    """
    classes: dict[str, ForestClass] = {}
    for idx, comp in enumerate(components):
        form, root = min((canonical_rooted_form(comp, r), r) for r in _centroids(comp))
        if form not in classes:
            classes[form] = ForestClass(rep=comp, rep_root=root)
        cls = classes[form]
        rep_order = canonical_order(cls.rep, cls.rep_root)
        mem_order = canonical_order(comp, root)
        cls.members.append(idx)
        cls.member_maps.append({rv: mv for rv, mv in zip(rep_order, mem_order)})
    return [classes[key] for key in sorted(classes)]


class ForestEmbedError(RuntimeError):
    def __init__(self, message: str, cause: str):
        super().__init__(message)
        self.cause = cause


def embed_small_forest(
    d: Digraph,
    components: list[OrientedTree],
    eps: float,
    rng: np.random.Generator,
    pool: np.ndarray | None = None,
    pop_min: int = 16,
) -> list[dict[int, int]]:
    """Vertex-disjoint embedding of a forest of small components.

    Components are grouped into isomorphism classes.  Populous classes go
    through the tree-copies machinery with per-class copy counts
    p_i * n = t_i + eps*n/(ell*s_i) (floors assigned largest-remainder, so
    the class targets always fit the pool).  Classes too thin for block
    matchings are embedded by a rooted greedy walk with all their leaves
    finished by one covering matching.

    Returns one vertex map per component.  Raises ForestEmbedError (cause
    "hall-fail" or "leaf-greedy-fail"; retryable) when a route fails.
    """
    n = d.n
    full_pool = np.arange(n, dtype=np.int64) if pool is None else np.asarray(pool, dtype=np.int64)
    total = sum(c.n for c in components)
    if total > (1 - eps) * len(full_pool):
        raise ValueError(
            f"forest too large: {total} vertices into a pool of {len(full_pool)} at eps={eps}"
        )
    if not components:
        return []

    classes = group_components(components)
    rich = [c for c in classes if len(c.members) >= pop_min and c.rep.n >= 2]
    rich_keys = {id(c) for c in rich}
    lean = [c for c in classes if id(c) not in rich_keys]

    results: list[dict[int, int] | None] = [None] * len(components)
    pool_n = len(full_pool)
    in_pool = np.zeros(n, dtype=bool)
    in_pool[full_pool] = True
    free = in_pool.copy()

    # Copies route: per class, p_i*n = t_i + eps*n/(ell*s_i) copies, floored
    # with largest remainders while the budget lasts.
    if rich:
        ell = len(classes)
        raw = [len(c.members) + eps * pool_n / (ell * c.rep.n) for c in rich]
        copy_counts = [max(len(c.members), int(np.floor(r))) for c, r in zip(rich, raw)]
        budget = int(free.sum()) - sum(
            components[i].n for c in lean for i in c.members
        )

        def need(counts):
            return sum(cnt * c.rep.n for cnt, c in zip(counts, rich))

        for idx in sorted(range(len(rich)), key=lambda i: raw[i] - copy_counts[i], reverse=True):
            trial = list(copy_counts)
            trial[idx] += 1
            if need(trial) <= budget:
                copy_counts = trial
        if need(copy_counts) > budget:
            raise ForestEmbedError("class targets exceed the pool", cause="hall-fail")

        avail = np.flatnonzero(free)
        perm = rng.permutation(len(avail))
        cursor = 0
        for c, per in zip(rich, copy_counts):
            size = per * c.rep.n
            chunk = avail[perm[cursor : cursor + size]]
            cursor += size
            v1 = np.sort(chunk[:per])
            v2 = np.sort(chunk[per:])
            try:
                copies = embed_tree_copies(d, c.rep, c.rep_root, v1, v2)
            except MatchingError as exc:
                raise ForestEmbedError(
                    f"copies route failed for a class of {len(c.members)} components: {exc}",
                    cause="hall-fail",
                ) from exc
            for copy, comp_idx, vmap in zip(copies, c.members, c.member_maps):
                results[comp_idx] = {vmap[rv]: hv for rv, hv in copy.map.items()}
                for hv in copy.used:
                    free[hv] = False
            # Surplus copies beyond the class population return to the pool.

    # Greedy interior walk + one leaf matching for the thin classes.
    if lean:
        leaf_slots: list[tuple[int, int, int, Sign]] = []  # (comp, leaf, parent, sign)
        for c in lean:
            for comp_idx, vmap in zip(c.members, c.member_maps):
                comp = components[comp_idx]
                order = prefix_order(comp, vmap[c.rep_root], "leaves_last_middles_consecutive")
                mapping: dict[int, int] = {}
                for i, tv in enumerate(order.order):
                    if comp.n > 1 and comp.degree(tv) == 1 and i > 0:
                        parent = order.order[order.parent_index[i]]
                        leaf_slots.append((comp_idx, tv, parent, order.sign[i]))
                        continue
                    if i == 0:
                        candidates = np.flatnonzero(free)
                    else:
                        parent_host = mapping[order.order[order.parent_index[i]]]
                        row = d.adj_row(parent_host, order.sign[i])
                        candidates = np.flatnonzero(row & free)
                    if len(candidates) == 0:
                        raise ForestEmbedError(
                            f"greedy interior stuck on component {comp_idx}",
                            cause="leaf-greedy-fail",
                        )
                    host = int(rng.choice(candidates))
                    mapping[tv] = host
                    free[host] = False
                results[comp_idx] = mapping

        if leaf_slots:
            cols = np.flatnonzero(free)
            adj = np.zeros((len(leaf_slots), len(cols)), dtype=bool)
            for r, (comp_idx, _tv, parent, sign) in enumerate(leaf_slots):
                parent_host = results[comp_idx][parent]
                adj[r] = d.adj_row(parent_host, sign)[cols]
            pattern = BipartitePattern.explicit(
                np.arange(len(leaf_slots)), cols, Sign.PLUS, adj
            )
            try:
                matching = covering_matching(pattern, what="forest leaf batch")
            except MatchingError as exc:
                raise ForestEmbedError(f"leaf batch unmatched: {exc}", cause="hall-fail") from exc
            for r, b in matching.pairs:
                comp_idx, tv, _parent, _sign = leaf_slots[r]
                results[comp_idx][tv] = int(b)

    assert all(m is not None and len(m) == components[i].n for i, m in enumerate(results))
    return results  # type: ignore[return-value]
