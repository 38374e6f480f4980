"""Text formats for digraphs, trees, matchings, and embeddings.

Digraph files: header line ``digraph <n>``, then one ``u v`` line per edge
meaning u->v.  Tree files: header ``tree <n> [t=<vertex>]`` then edges.
Blank lines and ``#`` comments are ignored; writers emit edges sorted by
(u, v), so round-trips are bit-exact.
"""

from __future__ import annotations

from .digraph import Digraph
from .trees import OrientedTree


class FormatError(ValueError):
    pass


def _content_lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def dumps_digraph(d: Digraph) -> str:
    lines = [f"digraph {d.n}"]
    lines.extend(f"{u} {v}" for u, v in d.edges())
    return "\n".join(lines) + "\n"


def loads_digraph(text: str) -> Digraph:
    lines = _content_lines(text)
    if not lines or not lines[0].startswith("digraph"):
        raise FormatError("expected 'digraph <n>' header")
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise FormatError("bad digraph header") from exc
    edges = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"bad edge line: {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    try:
        return Digraph.from_edges(n, edges)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def dumps_tree(tree: OrientedTree) -> str:
    header = f"tree {tree.n}" + (f" t={tree.t}" if tree.t is not None else "")
    lines = [header]
    lines.extend(f"{u} {v}" for u, v in sorted(tree.edge_list))
    return "\n".join(lines) + "\n"


def loads_tree(text: str) -> OrientedTree:
    lines = _content_lines(text)
    if not lines or not lines[0].startswith("tree"):
        raise FormatError("expected 'tree <n> [t=<vertex>]' header")
    head = lines[0].split()
    try:
        n = int(head[1])
    except (IndexError, ValueError) as exc:
        raise FormatError("bad tree header") from exc
    t = None
    for token in head[2:]:
        if token.startswith("t="):
            t = int(token[2:])
        else:
            raise FormatError(f"unknown header token {token!r}")
    edges = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"bad edge line: {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    try:
        return OrientedTree(n, edges, t=t)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def read_digraph(path) -> Digraph:
    with open(path) as fh:
        return loads_digraph(fh.read())


def write_digraph(path, d: Digraph) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_digraph(d))


def read_tree(path) -> OrientedTree:
    with open(path) as fh:
        return loads_tree(fh.read())


def write_tree(path, tree: OrientedTree) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_tree(tree))
