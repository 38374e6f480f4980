"""Command-line front door: generate, embed, verify, experiment.

Exit codes: 0 = success (embedding verified), 1 = usage/format error,
2 = embedding failed after retries.  All randomness flows from --seed, so
identical invocations produce identical outputs; wall-clock telemetry is
zeroed unless --timings is given, keeping default outputs bit-stable.
Setting ALG_DEBUG_AUDITS=1 turns on the quadratic consistency audits.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

import numpy as np

from . import io as tio
from .digraph import Digraph, debug_audits_enabled, gen_semidegree_digraph, min_semidegree
from .embedder import AbsorptionError, PhaseFailure, embed_almost_spanning, embed_spanning
from .embedding import Embedding
from .oracle import TrialConfig, reports_to_csv, run_trials, verify_embedding
from .params import ParamSchedule, almost_defaults, spanning_defaults
from .trees import gen_random_tree, max_semidegree


# CLI flag -> ParamSchedule field ("bigk" stands in for the upper size cap K)
_SCHEDULE_FLAGS = (
    ("alpha", "alpha", float), ("eps", "eps", float), ("mu", "mu", float),
    ("eta", "eta", float), ("beta", "beta", float), ("lam", "lam", float),
    ("k", "k", int), ("bigk", "K", int), ("retries", "retries", int),
)


def _schedule_overrides(args, base: ParamSchedule) -> ParamSchedule:
    updates = {}
    for flag, field, _typ in _SCHEDULE_FLAGS:
        val = getattr(args, f"p_{flag}", None)
        if val is not None:
            updates[field] = val
    sched = base.with_updates(**updates) if updates else base
    for warning in sched.validate():
        print(f"schedule warning: {warning}", file=sys.stderr)
    return sched


def _add_schedule_args(sub: argparse.ArgumentParser) -> None:
    for flag, _field, typ in _SCHEDULE_FLAGS:
        sub.add_argument(f"--p-{flag}", dest=f"p_{flag}", type=typ, default=None)


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "digraph":
        d = gen_semidegree_digraph(args.n, args.alpha, rng)
        tio.write_digraph(args.out, d)
        print(f"digraph n={d.n} edges={d.num_edges()} min_semidegree={min_semidegree(d)}")
    else:
        tree = gen_random_tree(args.n, args.max_semideg, args.family, rng)
        tio.write_tree(args.out, tree)
        dplus, dminus = max_semidegree(tree)
        print(f"tree n={tree.n} family={args.family} max_out={dplus} max_in={dminus}")
    return 0


def cmd_embed(args) -> int:
    try:
        d = tio.read_digraph(args.digraph)
        tree = tio.read_tree(args.tree)
    except (OSError, tio.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if debug_audits_enabled():
        d.check_consistency()
    rng = np.random.default_rng(args.seed)
    almost = args.almost or args.phase == "almost"
    if args.phase in ("stars", "paths", "absorber"):
        return _run_isolated_phase(args, d, tree, rng)
    if almost:
        if tree.n > d.n - 4:
            print("error: --almost needs |T| <= n - 4", file=sys.stderr)
            return 1
        base = almost_defaults(d.n, args.alpha_hint(d), args.eps)
    else:
        if tree.n != d.n:
            print(f"error: spanning embedding needs |T| = n ({tree.n} != {d.n})", file=sys.stderr)
            return 1
        base = spanning_defaults(d.n, args.alpha_hint(d))
    params = _schedule_overrides(args, base)

    t = tree.t if tree.t is not None else 0
    try:
        if almost:
            v = args.anchor if args.anchor is not None else int(rng.integers(d.n))
            emb, telemetry = embed_almost_spanning(d, tree.with_t(t), t, v, params, rng)
        else:
            emb, telemetry = embed_spanning(d, tree, params, rng)
    except (PhaseFailure, AbsorptionError) as exc:
        return _emit_failure(args, exc)

    assert verify_embedding(d, tree, emb)
    if not args.timings:
        telemetry = _strip_timings(telemetry)
    return _emit_embedding(args, emb, telemetry)


def _emit_embedding(args, emb, telemetry) -> int:
    text = emb.to_json(telemetry)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _emit_failure(args, exc) -> int:
    doc = {
        "success": False,
        "cause": getattr(exc, "cause", "S-fail"),
        "detail": str(exc),
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 2


def _run_isolated_phase(args, d, tree, rng) -> int:
    """Run one embedding phase on inputs derived from the tree, and verify it."""
    from .decompose import DecompositionError, decompose
    from .embedder import attach_path_trees, build_absorber, complete_absorption, embed_stars
    from .embedder import stars_from_decomposition
    from .trees import induced_subtree
    import numpy as _np

    t = tree.t if tree.t is not None else 0
    base = almost_defaults(d.n, args.alpha_hint(d), args.eps)
    params = _schedule_overrides(args, base)
    try:
        if args.phase == "stars":
            td = decompose(tree, t, params)
            stars = stars_from_decomposition(td)
            v = args.anchor if args.anchor is not None else int(rng.integers(d.n))
            emb = embed_stars(d, tree, {int(x) for x in td.t0}, stars, t, v, params, rng)
            for u, w in tree.edge_list:
                if u in emb and w in emb:
                    assert d.has_edge(emb[u], emb[w])
            return _emit_embedding(args, emb, {"phase": "stars", "embedded": len(emb)})
        if args.phase == "paths":
            td = decompose(tree, t, params)
            if not td.pieces:
                print("error: decomposition yields no path pieces", file=sys.stderr)
                return 1
            piece_inputs, anchor_pairs = [], []
            perm = rng.permutation(d.n)
            cursor = 0
            for p in td.pieces:
                piece = induced_subtree(tree, [p.x, p.y, p.mid_x, p.mid_y, *p.body])
                pos = {int(h): i for i, h in enumerate(piece.labels)}
                piece_inputs.append((piece, pos[p.x], pos[p.y]))
                anchor_pairs.append((int(perm[cursor]), int(perm[cursor + 1])))
                cursor += 2
            maps = attach_path_trees(d, piece_inputs, anchor_pairs, params, rng)
            emb = Embedding()
            for (piece, _r, _s), pmap in zip(piece_inputs, maps):
                for lv, lh in pmap.items():
                    tv = int(piece.labels[lv])
                    if tv not in emb:
                        emb.assign(tv, lh, "paths")
            return _emit_embedding(args, emb, {"phase": "paths", "pieces": len(maps)})
        # absorber: the input tree is the absorber tree
        if tree.n > d.n // 3:
            print("error: absorber phase needs |T| <= n/3", file=sys.stderr)
            return 1
        sched = _schedule_overrides(args, spanning_defaults(d.n, args.alpha_hint(d)))
        state = build_absorber(d, tree.with_t(t), t, sched, rng)
        free = _np.array(sorted(set(range(d.n)) - set(state.a_set.tolist())))
        extra = rng.choice(free, size=tree.n - len(state.a_set), replace=False)
        b = _np.array(sorted(set(state.a_set.tolist()) | {int(x) for x in extra}))
        emb = complete_absorption(state, b)
        assert verify_embedding(d, tree, emb)
        return _emit_embedding(
            args, emb,
            {"phase": "absorber", "threshold": state.threshold, "swaps": state.swap_count},
        )
    except (PhaseFailure, AbsorptionError, DecompositionError) as exc:
        return _emit_failure(args, exc)


def _strip_timings(doc):
    if isinstance(doc, dict):
        return {k: _strip_timings(v) for k, v in doc.items() if "millis" not in k}
    if isinstance(doc, list):
        return [_strip_timings(x) for x in doc]
    return doc


def cmd_verify(args) -> int:
    try:
        d = tio.read_digraph(args.digraph)
        tree = tio.read_tree(args.tree)
        with open(args.embedding) as fh:
            emb = Embedding.from_json(fh.read())
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ok = verify_embedding(d, tree, emb)
    spanning_ok = ok and (tree.n != d.n or len(emb.used) == d.n)
    print(f"verified={ok and spanning_ok}")
    return 0 if ok and spanning_ok else 2


def parse_experiment_config(text: str) -> tuple[list[TrialConfig], int]:
    """Flat key=value config with [experiment], [grid], [schedule] sections."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    target = exp.get("target", "spanning")
    trials = int(exp.get("trials", 10))
    seed = int(exp.get("seed", 0))
    jobs = int(exp.get("jobs", 1))
    record_millis = exp.get("timings", "0") == "1"

    grid = cp["grid"] if cp.has_section("grid") else {}
    ns = [int(x) for x in grid.get("n", "200").split(",")]
    alphas = [float(x) for x in grid.get("alpha", "0.25").split(",")]
    families = [x.strip() for x in grid.get("tree_family", "uniform").split(",")]
    eps = float(grid.get("eps", 0.2))
    set_size = int(grid.get("set_size", 0))
    max_semideg = int(grid.get("max_semideg", 3))

    overrides = {}
    if cp.has_section("schedule"):
        for key, val in cp["schedule"].items():
            if key in ("k", "retries", "pop_min", "part_pad", "switch_margin"):
                overrides[key] = int(val)
            elif key == "bigk":
                overrides["K"] = int(val)
            else:
                overrides[key] = float(val)

    configs = []
    for n in ns:
        for alpha in alphas:
            for family in families:
                sched = spanning_defaults(n, alpha).with_updates(**overrides) if overrides else None
                configs.append(
                    TrialConfig(
                        target=target, n=n, alpha=alpha, trials=trials, seed=seed,
                        tree_family=family, max_semideg=max_semideg, eps=eps,
                        set_size=set_size, record_millis=record_millis, schedule=sched,
                    )
                )
    return configs, jobs


def cmd_experiment(args) -> int:
    try:
        with open(args.config) as fh:
            configs, jobs = parse_experiment_config(fh.read())
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 1
    if args.jobs:
        jobs = args.jobs
    all_reports = []
    for cfg in configs:
        reports = run_trials(cfg, jobs=jobs)
        all_reports.extend(reports)
        rate = sum(r.success for r in reports)
        print(
            f"cell target={cfg.target} n={cfg.n} alpha={cfg.alpha} "
            f"family={cfg.tree_family}: {rate}/{len(reports)}",
            file=sys.stderr,
        )
    csv = reports_to_csv(all_reports)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spantree", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a digraph or tree file")
    gen.add_argument("kind", choices=("digraph", "tree"))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--alpha", type=float, default=0.25)
    gen.add_argument("--family", default="uniform")
    gen.add_argument("--max-semideg", type=int, default=3)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(fn=cmd_gen)

    emb = sub.add_parser("embed", help="embed a tree file into a digraph file")
    emb.add_argument("digraph")
    emb.add_argument("tree")
    emb.add_argument("--seed", type=int, required=True)
    emb.add_argument("--almost", action="store_true", help="almost-spanning mode")
    emb.add_argument("--eps", type=float, default=0.1)
    emb.add_argument("--anchor", type=int, default=None, help="host vertex for t")
    emb.add_argument("--phase", choices=("full", "almost", "stars", "paths", "absorber"),
                     default="full", help="run one phase in isolation")
    emb.add_argument("--out", default=None)
    emb.add_argument("--timings", action="store_true")
    _add_schedule_args(emb)
    emb.set_defaults(fn=cmd_embed)

    ver = sub.add_parser("verify", help="verify an embedding JSON")
    ver.add_argument("digraph")
    ver.add_argument("tree")
    ver.add_argument("embedding")
    ver.set_defaults(fn=cmd_verify)

    exp = sub.add_parser("experiment", help="run a Monte Carlo sweep from a config file")
    exp.add_argument("config")
    exp.add_argument("--out", default=None)
    exp.add_argument("--jobs", type=int, default=0)
    exp.set_defaults(fn=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def alpha_hint(d: Digraph) -> float:
        declared = getattr(args, "p_alpha", None)
        if declared is not None:
            return declared
        return max(0.01, min_semidegree(d) / d.n - 0.5)

    args.alpha_hint = alpha_hint
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
