"""Guide sets and guide graphs: the steering behind the random core embedding.

For an anchor vertex v and sign, a guide entry holds a set A inside
N^sign(v) plus two balanced bipartite graphs H+, H- from A into the host.
Rows carry exactly the same number of edges and back-degrees stay low, so
after restriction to random target sets every row keeps degree while no
target vertex is overloaded: the skew-bound that later forces the leaf
matchings to cover.
"""

import math

import numpy as np

from spantree import GuideSystem, Sign, gen_semidegree_digraph, is_skew_bounded
from spantree.digraph import sample_disjoint_subsets
from spantree.guides import build_guide, build_xy_labeling

rng = np.random.default_rng(5)
n, alpha = 500, 0.2
host = gen_semidegree_digraph(n, alpha, rng)

# The pairing certificate: every (x_i, y_i) has a large triple intersection.
lab = build_xy_labeling(host, 7, Sign.PLUS, alpha)
print(f"xy-labeling threshold (alpha^2 n): {lab.threshold}")
print(f"labeling verifies: {lab.verify(host)}")

# One guide entry with exact bookkeeping.
eps, eta, mu = 0.04, 0.5, 0.05
entry = build_guide(host, 7, Sign.PLUS, eps, eta, mu, alpha=alpha)
size, per_row = math.ceil(mu * n), math.ceil(eps * n)
print(f"\nguide set size {len(entry.guide)} (= ceil(mu n) = {size})")
print(f"edges per row {entry.edges_per_row} (= ceil(eps n) = {per_row})")
print(f"e(H+) = {int(entry.hplus.sum())} = size * per_row = {size * per_row}")
bound = math.ceil((1 + eta) * mu * eps * n)
print(f"H+ skew-bounded at ({per_row}, {bound}): "
      f"{is_skew_bounded(entry.pattern(Sign.PLUS), per_row, bound)}")
print(f"H- skew-bounded at ({per_row}, {bound}): "
      f"{is_skew_bounded(entry.pattern(Sign.MINUS), per_row, bound)}")

# Restriction to random sets: trim to V0 and audit per part.
system = GuideSystem(host, eps=0.1, eta=1.0, mu=0.3, alpha=alpha)
v0, part = sample_disjoint_subsets(host, [150, 250], rng)
system.restrict(v0, [part], mu_count=20)
restricted = system.get(7, Sign.PLUS)
print(f"\nrestricted guide set size: {len(restricted.guide)} (all inside V0)")
sub = restricted.hplus[:, part]
print(f"row degrees into the part: min={int(sub.sum(axis=1).min())}, "
      f"mean={sub.sum(axis=1).mean():.1f}")
print(f"part back-degrees: max={int(sub.sum(axis=0).max())}")
