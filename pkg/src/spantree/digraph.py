"""Dense digraph representation with fast neighborhood-set queries.

Vertices are dense integers 0..n-1.  Adjacency is kept both as per-vertex
sorted arrays (canonical, cheap iteration) and as a boolean matrix
(constant-time edge tests, vectorized triple intersections).  Instances are
immutable after construction and safe to share across concurrent trials.
"""

from __future__ import annotations

import enum
import os

import numpy as np


class Sign(enum.Enum):
    """Edge direction selector: PLUS = out-edges, MINUS = in-edges."""

    PLUS = "+"
    MINUS = "-"

    @property
    def flip(self) -> "Sign":
        return Sign.MINUS if self is Sign.PLUS else Sign.PLUS

    def __str__(self) -> str:
        return self.value

    @staticmethod
    def from_str(s: str) -> "Sign":
        if s in ("+", "plus", "out"):
            return Sign.PLUS
        if s in ("-", "minus", "in"):
            return Sign.MINUS
        raise ValueError(f"not a sign: {s!r}")


SIGNS = (Sign.PLUS, Sign.MINUS)


def debug_audits_enabled() -> bool:
    return os.environ.get("ALG_DEBUG_AUDITS", "") == "1"


class Digraph:
    """Immutable digraph: at most one edge per ordered pair, no loops."""

    __slots__ = ("n", "mat", "_out", "_in")

    def __init__(self, n: int, mat: np.ndarray):
        if n < 1:
            raise ValueError("digraph needs at least one vertex")
        if mat.shape != (n, n) or mat.dtype != np.bool_:
            raise ValueError("adjacency matrix must be boolean n x n")
        if mat.diagonal().any():
            raise ValueError("self-loops are not allowed")
        self.n = n
        self.mat = mat
        self.mat.setflags(write=False)
        self._out = tuple(np.flatnonzero(mat[v]).astype(np.int32) for v in range(n))
        self._in = tuple(np.flatnonzero(mat[:, v]).astype(np.int32) for v in range(n))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Digraph":
        mat = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) outside 0..{n - 1}")
            mat[u, v] = True
        return cls(n, mat)

    def edges(self) -> list[tuple[int, int]]:
        """All edges sorted by (u, v)."""
        us, vs = np.nonzero(self.mat)
        return list(zip(us.tolist(), vs.tolist()))

    def num_edges(self) -> int:
        return int(self.mat.sum())

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.mat[u, v])

    def out(self, v: int) -> np.ndarray:
        return self._out[v]

    def in_(self, v: int) -> np.ndarray:
        return self._in[v]

    def adj(self, v: int, sign: Sign) -> np.ndarray:
        return self._out[v] if sign is Sign.PLUS else self._in[v]

    def adj_row(self, v: int, sign: Sign) -> np.ndarray:
        """Boolean neighborhood row; N^+(v) reads mat[v], N^-(v) reads mat[:, v]."""
        return self.mat[v] if sign is Sign.PLUS else self.mat[:, v]

    def out_degrees(self) -> np.ndarray:
        return self.mat.sum(axis=1)

    def in_degrees(self) -> np.ndarray:
        return self.mat.sum(axis=0)

    def degree(self, v: int, sign: Sign) -> int:
        return len(self.adj(v, sign))

    def induce(self, vertices: np.ndarray) -> tuple["Digraph", np.ndarray]:
        """Induced subdigraph plus the new-index -> original-vertex labels."""
        labels = np.asarray(sorted(int(v) for v in vertices), dtype=np.int64)
        sub = self.mat[np.ix_(labels, labels)].copy()
        return Digraph(len(labels), sub), labels

    def check_consistency(self) -> None:
        """Exhaustive out/in cross-check (debug audit)."""
        for v in range(self.n):
            for u in self._out[v]:
                assert v in self._in[u], f"edge ({v},{u}) missing from in-adjacency"
            for u in self._in[v]:
                assert v in self._out[u], f"edge ({u},{v}) missing from out-adjacency"


def min_semidegree(d: Digraph) -> int:
    """Smallest in- or out-degree over all vertices."""
    return int(min(d.out_degrees().min(), d.in_degrees().min()))


def neighbors(d: Digraph, v: int, sign: Sign, restrict: np.ndarray) -> np.ndarray:
    """N^sign(v) intersected with `restrict`, sorted."""
    restrict = np.asarray(restrict, dtype=np.int64)
    row = d.adj_row(v, sign)
    keep = restrict[row[restrict]]
    return np.unique(keep)


def gen_semidegree_digraph(n: int, alpha: float, rng: np.random.Generator) -> Digraph:
    """Random digraph with min semidegree at least ceil((1/2 + alpha) n), guaranteed.

    Each ordered pair is included independently with probability 1/2 + 2*alpha
    (clamped to 1), then deficient vertices are repaired by adding uniformly
    chosen missing edges.  The construction fails only when the target degree
    exceeds n - 1.
    """
    if n < 4:
        raise ValueError("need n >= 4")
    if not (0 < alpha < 0.5):
        raise ValueError("need 0 < alpha < 1/2")
    target = int(np.ceil((0.5 + alpha) * n))
    if target > n - 1:
        raise ValueError(
            f"irreparable: target semidegree {target} exceeds n-1 = {n - 1} for every vertex"
        )
    prob = min(1.0, 0.5 + 2 * alpha)
    mat = rng.random((n, n)) < prob
    np.fill_diagonal(mat, False)

    # Repair: bring every deficient out- then in-degree up to the target.
    for v in range(n):
        row = mat[v]
        deficit = target - int(row.sum())
        if deficit > 0:
            missing = np.flatnonzero(~row)
            missing = missing[missing != v]
            add = rng.choice(missing, size=deficit, replace=False)
            row[add] = True
    for v in range(n):
        col = mat[:, v]
        deficit = target - int(col.sum())
        if deficit > 0:
            missing = np.flatnonzero(~col)
            missing = missing[missing != v]
            add = rng.choice(missing, size=deficit, replace=False)
            mat[add, v] = True

    d = Digraph(n, mat)
    assert min_semidegree(d) >= target, "repair failed to reach the semidegree target"
    return d


def sample_disjoint_subsets(
    d: Digraph, sizes: list[int], rng: np.random.Generator
) -> list[np.ndarray]:
    """Pairwise-disjoint uniform vertex subsets of the requested sizes.

    Uniformity over all tuples comes from slicing a single uniform
    permutation at consecutive prefixes.
    """
    total = sum(sizes)
    if total > d.n:
        raise ValueError(f"requested {total} vertices from a digraph with {d.n}")
    perm = rng.permutation(d.n)
    out = []
    start = 0
    for size in sizes:
        out.append(np.sort(perm[start : start + size]).astype(np.int64))
        start += size
    return out


def check_inherited_degree(d: Digraph, a: np.ndarray, alpha: float) -> bool:
    """True iff every vertex has in- and out-degree into `a` at least (1/2 + alpha/2)|a|."""
    a = np.asarray(a, dtype=np.int64)
    if len(a) == 0:
        raise ValueError("restriction set must be nonempty")
    bound = (0.5 + alpha / 2) * len(a)
    out_into = d.mat[:, a].sum(axis=1)
    in_into = d.mat[a, :].sum(axis=0)
    return bool(out_into.min() >= bound and in_into.min() >= bound)
