"""Partial injective tree-to-host maps with per-phase provenance."""

from __future__ import annotations

import json

import numpy as np

from .digraph import Digraph
from .trees import OrientedTree


class Embedding:
    """Partial injective map from tree vertices to host vertices."""

    __slots__ = ("map", "used", "phase")

    def __init__(self):
        self.map: dict[int, int] = {}
        self.used: set[int] = set()
        self.phase: dict[int, str] = {}

    def assign(self, tree_vertex: int, host_vertex: int, phase: str = "") -> None:
        host_vertex = int(host_vertex)
        tree_vertex = int(tree_vertex)
        if tree_vertex in self.map:
            raise ValueError(f"tree vertex {tree_vertex} already embedded")
        if host_vertex in self.used:
            raise ValueError(f"host vertex {host_vertex} already used")
        self.map[tree_vertex] = host_vertex
        self.used.add(host_vertex)
        self.phase[tree_vertex] = phase

    def reassign(self, tree_vertex: int, host_vertex: int, phase: str = "") -> None:
        """Move an embedded tree vertex to a fresh host vertex (absorber swaps)."""
        host_vertex = int(host_vertex)
        old = self.map[tree_vertex]
        if host_vertex in self.used:
            raise ValueError(f"host vertex {host_vertex} already used")
        self.used.remove(old)
        self.used.add(host_vertex)
        self.map[tree_vertex] = host_vertex
        if phase:
            self.phase[tree_vertex] = phase

    def __getitem__(self, tree_vertex: int) -> int:
        return self.map[tree_vertex]

    def __contains__(self, tree_vertex: int) -> bool:
        return tree_vertex in self.map

    def __len__(self) -> int:
        return len(self.map)

    def image(self) -> set[int]:
        return set(self.used)

    def inverse(self) -> dict[int, int]:
        return {h: t for t, h in self.map.items()}

    def merge(self, other: "Embedding", translate=None) -> None:
        """Absorb another embedding; `translate` maps its tree ids into ours."""
        for tv, hv in other.map.items():
            tt = int(translate[tv]) if translate is not None else tv
            if tt in self.map:
                if self.map[tt] != hv:
                    raise ValueError(f"conflicting images for tree vertex {tt}")
                continue
            self.assign(tt, hv, other.phase.get(tv, ""))

    def relabel_hosts(self, labels: np.ndarray) -> "Embedding":
        """Compose with an induced-subgraph labeling (local host -> global host)."""
        out = Embedding()
        for tv, hv in self.map.items():
            out.assign(tv, int(labels[hv]), self.phase.get(tv, ""))
        return out

    def to_json(self, telemetry: dict | None = None) -> str:
        doc = {"map": {str(tv): hv for tv, hv in sorted(self.map.items())}}
        if telemetry is not None:
            doc["telemetry"] = telemetry
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Embedding":
        doc = json.loads(text)
        emb = cls()
        for tv, hv in sorted((int(a), int(b)) for a, b in doc["map"].items()):
            emb.assign(tv, hv)
        return emb


def is_valid_embedding(d: Digraph, tree: OrientedTree, emb: Embedding) -> bool:
    """Total + injective + every tree edge maps to a host edge of the same direction."""
    if len(emb.map) != tree.n:
        return False
    if len(emb.used) != tree.n:
        return False
    for u, v in tree.edge_list:
        if u not in emb.map or v not in emb.map:
            return False
        if not d.has_edge(emb.map[u], emb.map[v]):
            return False
    return True
