"""Absorption by switching: embed flexibly now, swallow leftovers later.

Most of the absorber tree embeds by a random greedy walk; the embedding is
kept only if every host pair (x, y) sees many switchable indices: embedded
vertices adjacent to x whose current copy-neighborhood y can take over.
That reservoir makes the completion deterministic: each leftover vertex y
replaces a switchable index, whose freed host becomes the next new leaf.
"""

import numpy as np

from spantree import gen_random_tree, gen_semidegree_digraph, verify_embedding
from spantree.embedder import build_absorber, complete_absorption
from spantree.params import spanning_defaults

rng = np.random.default_rng(3)
n, alpha = 1000, 0.2
host = gen_semidegree_digraph(n, alpha, rng)
params = spanning_defaults(n, alpha)

size = params.absorber_size(n)
tree = gen_random_tree(size, 3, "uniform", rng).with_t(0)
print(f"absorber tree: {size} vertices; absorption gap: {params.absorb_gap(n)}")

state = build_absorber(host, tree, 0, params, rng)
print(f"trunk embedded: {len(state.hosts)} vertices, swaps to perform: {state.swap_count}")
print(f"property-S floor verified at threshold {state.threshold} "
      f"over all {n}x{n} vertex pairs and both signs")
print(f"|A| = {len(state.a_set)} = |T| - gap = {tree.n - params.absorb_gap(n)}")

# Any superset B of A with |B| = |T| completes deterministically.
free = np.array(sorted(set(range(n)) - set(state.a_set.tolist())))
extra = rng.choice(free, size=tree.n - len(state.a_set), replace=False)
b_set = np.array(sorted(set(state.a_set.tolist()) | {int(x) for x in extra}))
emb = complete_absorption(state, b_set)
print(f"completed: verified={verify_embedding(host, tree, emb)}, "
      f"image == B: {set(emb.used) == set(b_set.tolist())}")
