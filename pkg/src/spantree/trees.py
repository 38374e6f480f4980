"""Oriented trees: representation, orderings, generators, structural helpers.

A tree is stored with dense vertex ids 0..n-1 and an explicit list of
directed edges (tail, head).  Orientation never affects connectivity
arguments, so underlying-degree machinery works on the undirected shadow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .digraph import Sign


class OrientedTree:
    """Immutable tree whose edges carry an orientation."""

    __slots__ = ("n", "edge_list", "t", "_out", "_in", "_und")

    def __init__(self, n: int, edges, t: int | None = None):
        if n < 1:
            raise ValueError("tree needs at least one vertex")
        edge_list = [(int(u), int(v)) for u, v in edges]
        if len(edge_list) != n - 1:
            raise ValueError(f"a tree on {n} vertices needs {n - 1} edges, got {len(edge_list)}")
        if t is not None and not (0 <= t < n):
            raise ValueError(f"distinguished vertex {t} out of range")
        out: list[list[int]] = [[] for _ in range(n)]
        in_: list[list[int]] = [[] for _ in range(n)]
        und: list[list[int]] = [[] for _ in range(n)]
        for u, v in edge_list:
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"bad edge ({u},{v})")
            out[u].append(v)
            in_[v].append(u)
            und[u].append(v)
            und[v].append(u)
        self.n = n
        self.edge_list = tuple(edge_list)
        self.t = t
        self._out = tuple(tuple(sorted(x)) for x in out)
        self._in = tuple(tuple(sorted(x)) for x in in_)
        self._und = tuple(tuple(sorted(x)) for x in und)
        self._check_connected()

    def _check_connected(self) -> None:
        seen = [False] * self.n
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            v = stack.pop()
            for u in self._und[v]:
                if not seen[u]:
                    seen[u] = True
                    count += 1
                    stack.append(u)
        if count != self.n:
            raise ValueError("edges do not form a connected tree")

    def out(self, v: int) -> tuple[int, ...]:
        return self._out[v]

    def in_(self, v: int) -> tuple[int, ...]:
        return self._in[v]

    def nbrs(self, v: int) -> tuple[int, ...]:
        return self._und[v]

    def adj(self, v: int, sign: Sign) -> tuple[int, ...]:
        return self._out[v] if sign is Sign.PLUS else self._in[v]

    def degree(self, v: int) -> int:
        return len(self._und[v])

    def edge_sign(self, u: int, v: int) -> Sign:
        """Sign s with v in N^s(u); requires u, v adjacent."""
        if v in self._out[u]:
            return Sign.PLUS
        if v in self._in[u]:
            return Sign.MINUS
        raise ValueError(f"{u} and {v} are not adjacent")

    def leaves(self) -> list[int]:
        return [v for v in range(self.n) if len(self._und[v]) == 1]

    def with_t(self, t: int) -> "OrientedTree":
        return OrientedTree(self.n, self.edge_list, t=t)

    def __len__(self) -> int:
        return self.n


def max_semidegree(tree: OrientedTree) -> tuple[int, int]:
    """(max out-degree, max in-degree)."""
    return (
        max(len(tree.out(v)) for v in range(tree.n)),
        max(len(tree.in_(v)) for v in range(tree.n)),
    )


@dataclass(frozen=True)
class PrefixOrdering:
    """Vertex order where every prefix induces a subtree.

    order[0] is the root; for i >= 1, order[i] attaches to
    order[parent_index[i]] (its unique neighbor among earlier vertices),
    and sign[i] is the direction: order[i] in N^{sign[i]}(parent).
    """

    order: tuple[int, ...]
    parent_index: tuple[int, ...]   # parent_index[0] == -1
    sign: tuple[Sign | None, ...]   # sign[0] is None

    def __len__(self) -> int:
        return len(self.order)


def _component_roots(tree: OrientedTree, roots: list[int]) -> list[int]:
    return roots


def prefix_order(tree: OrientedTree, root: int, policy: str = "any") -> PrefixOrdering:
    """Order the tree so every prefix is connected.

    Policies:
      * "any": depth-first preorder from the root.
      * "leaves_last_middles_consecutive": all non-root leaves occupy a
        suffix; interior degree-2 runs (bare-path interiors) are traversed
        consecutively, so the middle 3 vertices of any length-6 bare path
        are consecutive in the order.
    """
    if policy not in ("any", "leaves_last_middles_consecutive"):
        raise ValueError(f"unknown policy {policy!r}")
    if not (0 <= root < tree.n):
        raise ValueError("root out of range")

    def dfs(allowed) -> list[int]:
        order = [root]
        seen = {root}
        stack = [root]
        while stack:
            v = stack.pop()
            for u in reversed(tree.nbrs(v)):
                if u not in seen and allowed(u):
                    seen.add(u)
                    order.append(u)
                    stack.append(u)
        return order

    if policy == "any":
        order = dfs(lambda u: True)
    else:
        is_leaf = [tree.degree(v) == 1 for v in range(tree.n)]
        order = dfs(lambda u: not is_leaf[u])
        order.extend(v for v in range(tree.n) if is_leaf[v] and v != root)
    assert len(order) == tree.n, "ordering missed vertices"

    pos = {v: i for i, v in enumerate(order)}
    parent_index: list[int] = [-1]
    signs: list[Sign | None] = [None]
    for i in range(1, len(order)):
        v = order[i]
        earlier = [u for u in tree.nbrs(v) if pos[u] < i]
        assert len(earlier) == 1, "prefix is not a tree"
        parent = earlier[0]
        parent_index.append(pos[parent])
        signs.append(tree.edge_sign(parent, v))
    return PrefixOrdering(tuple(order), tuple(parent_index), tuple(signs))


def find_independent_leaves(tree: OrientedTree) -> list[int]:
    """Greedy maximal set of leaves, no two sharing a neighbor (by vertex id)."""
    if tree.n < 2:
        raise ValueError("need at least two vertices")
    used_nbrs: set[int] = set()
    chosen = []
    for v in range(tree.n):
        if tree.degree(v) == 1:
            nb = tree.nbrs(v)[0]
            if nb not in used_nbrs:
                chosen.append(v)
                used_nbrs.add(nb)
    return chosen


@dataclass(frozen=True)
class BarePath:
    """Path whose interior vertices all have underlying degree 2 in the host tree."""

    vertices: tuple[int, ...]

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.vertices[0], self.vertices[-1]

    @property
    def interior(self) -> tuple[int, ...]:
        return self.vertices[1:-1]

    def __len__(self) -> int:
        return len(self.vertices) - 1


def maximal_bare_paths(tree: OrientedTree) -> list[list[int]]:
    """Maximal paths of degree-2 interior vertices between leaves/branch vertices.

    Paths may share endpoints (branch vertices) but never interior vertices.
    A cycle-free degree-2 tree (a path) yields one maximal path.
    """
    if tree.n <= 2:
        return [[v for v in range(tree.n)]] if tree.n == 2 else []
    stop = [tree.degree(v) != 2 for v in range(tree.n)]
    paths = []
    seen_interior = [False] * tree.n
    for v in range(tree.n):
        if not stop[v]:
            continue
        for u in tree.nbrs(v):
            # Edges between two stop vertices have no interior and never
            # yield a cuttable segment; interior chains are walked once.
            if stop[u] or seen_interior[u]:
                continue
            walk = [v, u]
            seen_interior[u] = True
            while not stop[walk[-1]]:
                nxt = [w for w in tree.nbrs(walk[-1]) if w != walk[-2]][0]
                walk.append(nxt)
                if not stop[nxt]:
                    seen_interior[nxt] = True
            paths.append(walk)
    return paths


def find_bare_paths(tree: OrientedTree, m: int) -> list[BarePath]:
    """Vertex-disjoint bare paths of length exactly m.

    Removing their interiors leaves at most 6*m*t + 2|T|/(m+1) vertices,
    where t is the leaf count; that bound is asserted on every call.
    """
    if m < 2:
        raise ValueError("need m >= 2")
    chosen: list[BarePath] = []
    used = np.zeros(tree.n, dtype=bool)
    for walk in maximal_bare_paths(tree):
        a = 0
        while a + m < len(walk):
            seg = walk[a : a + m + 1]
            if not any(used[v] for v in seg):
                chosen.append(BarePath(tuple(seg)))
                for v in seg:
                    used[v] = True
                a += m + 1
            else:
                a += 1

    interior_removed = sum(m - 1 for _ in chosen)
    leaf_count = max(2, len(tree.leaves()))
    bound = 6 * m * leaf_count + 2 * tree.n / (m + 1)
    remaining = tree.n - interior_removed
    assert remaining <= bound, (
        f"bare-path residue {remaining} exceeds bound {bound:.1f} "
        f"(n={tree.n}, m={m}, leaves={leaf_count})"
    )
    return chosen


@dataclass(frozen=True)
class TreePiece:
    """A subtree extracted from a host tree, relabeled to dense ids."""

    tree: OrientedTree
    labels: np.ndarray  # piece vertex -> host-tree vertex

    def to_host(self, piece_vertex: int) -> int:
        return int(self.labels[piece_vertex])


def induced_subtree(tree: OrientedTree, vertices, t: int | None = None) -> TreePiece:
    """Subtree induced on `vertices` (must be connected), dense-relabelled."""
    verts = sorted(int(v) for v in vertices)
    index = {v: i for i, v in enumerate(verts)}
    edges = [
        (index[u], index[v])
        for u, v in tree.edge_list
        if u in index and v in index
    ]
    local_t = index[t] if t is not None else None
    sub = OrientedTree(len(verts), edges, t=local_t)
    return TreePiece(sub, np.asarray(verts, dtype=np.int64))


def split_tree(tree: OrientedTree, m: int, keep: int | None = None):
    """Split into edge-disjoint subtrees T1, T2 sharing one vertex, m <= |T2| <= 3m.

    `keep` (default: tree.t or 0) is guaranteed to be a vertex of T1.
    Returns (piece1, piece2, shared) with pieces carrying host labels.
    """
    if not (1 <= m <= tree.n / 3):
        raise ValueError(f"need 1 <= m <= |T|/3, got m={m}, |T|={tree.n}")
    root = keep if keep is not None else (tree.t if tree.t is not None else 0)

    parent = [-1] * tree.n
    order = [root]
    for v in order:
        for u in tree.nbrs(v):
            if u != parent[v]:
                parent[u] = v
                order.append(u)
    size = [1] * tree.n
    for v in reversed(order):
        if parent[v] >= 0:
            size[parent[v]] += size[v]

    # Deepest vertex with subtree size >= m; all its children subtrees are < m.
    pivot = root
    progressed = True
    while progressed:
        progressed = False
        for u in tree.nbrs(pivot):
            if u != parent[pivot] and size[u] >= m:
                pivot = u
                progressed = True
                break

    children = sorted(
        (u for u in tree.nbrs(pivot) if u != parent[pivot]),
        key=lambda u: size[u],
    )
    took: list[int] = []
    total = 0
    for u in children:
        if total >= m - 1:
            break
        took.append(u)
        total += size[u]
    assert m - 1 <= total <= 2 * m - 2, "accumulation bound broken"

    t2_vertices = {pivot}
    stack = list(took)
    while stack:
        v = stack.pop()
        t2_vertices.add(v)
        stack.extend(u for u in tree.nbrs(v) if u != parent[v])
    t1_vertices = (set(range(tree.n)) - t2_vertices) | {pivot}

    piece2 = induced_subtree(tree, t2_vertices)
    piece1 = induced_subtree(tree, t1_vertices, t=root if root in t1_vertices else None)
    assert m <= piece2.tree.n <= 3 * m
    assert piece1.tree.n + piece2.tree.n == tree.n + 1
    return piece1, piece2, pivot


def gen_random_tree(
    n: int,
    max_semideg: int,
    family: str,
    rng: np.random.Generator,
) -> OrientedTree:
    """Random test tree with Delta^+/- at most max_semideg.

    Families: uniform (random recursive attachment), path, star,
    caterpillar, spider, broom.
    """
    if n < 1:
        raise ValueError("n >= 1")
    if max_semideg < 1:
        raise ValueError("max_semideg >= 1")
    if n == 1:
        return OrientedTree(1, [], t=0)

    out_deg = np.zeros(n, dtype=np.int64)
    in_deg = np.zeros(n, dtype=np.int64)
    edges: list[tuple[int, int]] = []

    def orient(parent: int, child: int) -> None:
        """Attach child to parent in a random feasible direction."""
        can_out = out_deg[parent] < max_semideg
        can_in = in_deg[parent] < max_semideg
        if not (can_out or can_in):
            raise ValueError("family/degree combination infeasible")
        if can_out and can_in:
            forward = bool(rng.integers(2))
        else:
            forward = can_out
        if forward:
            edges.append((parent, child))
            out_deg[parent] += 1
            in_deg[child] += 1
        else:
            edges.append((child, parent))
            out_deg[child] += 1
            in_deg[parent] += 1

    if family == "path":
        for v in range(n - 1):
            edges.append((v, v + 1))
    elif family == "star":
        if max_semideg < n - 1:
            raise ValueError(f"star with n={n} needs max_semideg >= {n - 1}")
        for v in range(1, n):
            edges.append((0, v))
    elif family == "uniform":
        for v in range(1, n):
            feasible = np.flatnonzero(
                (out_deg[:v] < max_semideg) | (in_deg[:v] < max_semideg)
            )
            capacity = (
                2 * max_semideg - out_deg[feasible] - in_deg[feasible]
            ).astype(float)
            parent = int(rng.choice(feasible, p=capacity / capacity.sum()))
            orient(parent, v)
    elif family == "caterpillar":
        spine_len = max(2, n // 3)
        for v in range(spine_len - 1):
            orient(v, v + 1)
        for v in range(spine_len, n):
            feasible = np.flatnonzero(
                (out_deg[:spine_len] < max_semideg) | (in_deg[:spine_len] < max_semideg)
            )
            if len(feasible) == 0:
                raise ValueError("family/degree combination infeasible")
            orient(int(rng.choice(feasible)), v)
    elif family == "spider":
        legs = min(2 * max_semideg, max(2, int(np.ceil(np.sqrt(n)))))
        nxt = 1
        tips = []
        for _ in range(min(legs, n - 1)):
            orient(0, nxt)
            tips.append(nxt)
            nxt += 1
        i = 0
        while nxt < n:
            orient(tips[i % len(tips)], nxt)
            tips[i % len(tips)] = nxt
            nxt += 1
            i += 1
    elif family == "broom":
        handle = max(1, n - 2 * max_semideg)
        for v in range(handle - 1):
            orient(v, v + 1)
        for v in range(handle, n):
            feasible = np.flatnonzero(
                (out_deg[: max(1, handle)] < max_semideg)
                | (in_deg[: max(1, handle)] < max_semideg)
            )
            if len(feasible) == 0:
                raise ValueError("family/degree combination infeasible")
            orient(int(feasible[-1]), v)
    else:
        raise ValueError(f"unknown family {family!r}")

    tree = OrientedTree(n, edges, t=0)
    dplus, dminus = max_semidegree(tree)
    if family != "star" and (dplus > max_semideg or dminus > max_semideg):
        raise ValueError("family/degree combination infeasible")
    return tree


def canonical_rooted_form(tree: OrientedTree, root: int) -> str:
    """Canonical string: equal iff rooted-oriented-isomorphic (AHU with signs)."""
    form, _ = _canon(tree, root)
    return form


def canonical_order(tree: OrientedTree, root: int) -> list[int]:
    """Canonical traversal order; isomorphic pairs' orders correspond position-wise."""
    _, order = _canon(tree, root)
    return order


def _canon(tree: OrientedTree, root: int) -> tuple[str, list[int]]:
    def rec(v: int, parent: int) -> tuple[str, list[int]]:
        items = []
        for u in tree.nbrs(v):
            if u == parent:
                continue
            label = "+" if u in tree.out(v) else "-"
            sub, sub_order = rec(u, v)
            items.append((label + sub, sub_order))
        items.sort(key=lambda it: it[0])
        order = [v]
        for _, sub_order in items:
            order.extend(sub_order)
        return "(" + "".join(it[0] for it in items) + ")", order

    return rec(root, -1)
