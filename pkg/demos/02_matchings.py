"""Directed bipartite matchings: Hall certificates and skew-bounds.

A pattern pairs a left class A with a right class B under a sign; when a
covering matching is missing, the library hands back a Hall violator
(a subset of A with a smaller neighborhood).  Skew-bounded patterns
(every A-degree at least a, every B-back-degree at most b, a >= b) always
carry a covering matching; the library makes that a hard assertion.
"""

import numpy as np

from spantree import (
    BipartitePattern,
    Sign,
    find_perfect_matching,
    gen_semidegree_digraph,
    hall_violator,
    is_skew_bounded,
    matching_from_skew,
    sample_disjoint_subsets,
)
from spantree.matching import MatchingError

rng = np.random.default_rng(7)
host = gen_semidegree_digraph(300, 0.2, rng)

# Perfect matchings between random disjoint sets exist reliably.
a, b = sample_disjoint_subsets(host, [40, 40], rng)
m = find_perfect_matching(host, a, b, Sign.PLUS)
print(f"perfect +matching between random 40-sets: {len(m)} edges")
print("first rows of the dump:")
print("\n".join(m.dump().splitlines()[:4]))

# A pattern built to fail Hall, and its certificate.
adj = np.zeros((3, 2), dtype=bool)
adj[:, 0] = True  # three rows, one shared neighbor
bad = BipartitePattern.explicit([10, 11, 12], [20, 21], Sign.PLUS, adj)
violator = hall_violator(bad)
print(f"\nhall violator of the 3-into-1 pattern: {violator} (neighborhood is smaller)")

# Skew-bounded patterns force coverage: 6 rows of degree 3 over 9 columns,
# each column hit exactly twice.
adj = np.zeros((6, 9), dtype=bool)
for i in range(6):
    adj[i, [(3 * i) % 9, (3 * i + 1) % 9, (3 * i + 2) % 9]] = True
pat = BipartitePattern.explicit(np.arange(6), np.arange(9), Sign.PLUS, adj)
print(f"\npattern is (3, 2, +)-skew-bounded: {is_skew_bounded(pat, 3, 2)}")
covering = matching_from_skew(pat, 3, 2)
print(f"covering matching size: {len(covering)} (covers all of A)")

# Adversarial small case: B inside the non-neighbors of one A-vertex.
non_nbrs = np.setdiff1d(np.arange(300), host.out(0))[:10]
non_nbrs = non_nbrs[non_nbrs != 0]
try:
    find_perfect_matching(host, np.array([0]), non_nbrs[:1], Sign.PLUS)
except MatchingError as exc:
    print(f"\nadversarial case correctly rejected: {exc}")
