"""The nested tree decomposition T0 < T1 < T2 < T3 behind the embedder.

Iterated independent-leaf stripping shrinks the tree to a low-leaf core;
long bare paths of the core are cut into middle pieces re-attached by two
bare length-2 paths; stripped material re-hangs as star trees on the core
or as leftover leaves.  The P1-P4 validator machine-checks the result.
"""

import numpy as np

from spantree import ParamSchedule, gen_random_tree
from spantree.decompose import check_decomposition, decompose

params = ParamSchedule(alpha=0.25, eta=0.05, k=12, K=600, strip_eps=0.02)

for family in ("uniform", "path", "caterpillar", "spider"):
    tree = gen_random_tree(2000, 3, family, np.random.default_rng(1))
    td = decompose(tree, 0, params)
    leftover = tree.n - len(td.t2)
    print(
        f"{family:11s}  |T0|={len(td.t0):4d}  |T1|={len(td.t1):4d}  "
        f"|T2|={len(td.t2):4d}  pieces={len(td.pieces):2d}  leftover={leftover:3d}  "
        f"validator={'clean' if not check_decomposition(td) else 'VIOLATIONS'}"
    )

# A closer look at one piece of a path decomposition.
tree = gen_random_tree(2000, 1, "path", np.random.default_rng(2))
td = decompose(tree, 0, params)
p = td.pieces[0]
print(f"\nfirst piece of the path decomposition:")
print(f"  anchors x={p.x}, y={p.y} stay in T0")
print(f"  bare 2-paths run through mid_x={p.mid_x}, mid_y={p.mid_y}")
print(f"  body has {len(p.body)} vertices (bounds: [{td.k}, {td.K}])")
print("\ndecomposition dump (truncated):")
print(td.to_json()[:300], "...")
