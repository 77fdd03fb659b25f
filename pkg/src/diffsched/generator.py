"""Synthetic layered-DAG workload generator.

Nodes are split into ``depth`` near-uniform layers. Every node outside the
first layer gets at least one predecessor in the immediately previous layer,
which pins the layer-chain depth exactly; extra forward edges are added with
probability density * decay^(layer distance - 1). All difference constants
are 0 (pure dataflow edges).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Edge, Node, SchedGraph, validate

_SKIP_DECAY = 0.5


@dataclass
class GenSpec:
    n_nodes: int
    depth: int
    density: float = 0.2
    mem_range: tuple[float, float] = (1.0, 1.0)
    comm_range: tuple[float, float] = (1.0, 4.0)
    seed: int = 0

    def validate(self) -> None:
        if self.depth < 1 or self.n_nodes < 1:
            raise ValueError("n_nodes and depth must be positive")
        if self.depth > self.n_nodes:
            raise ValueError("depth cannot exceed n_nodes")
        if not (0.0 < self.density <= 1.0):
            raise ValueError("density must be in (0, 1]")
        for lo, hi in (self.mem_range, self.comm_range):
            if lo < 0 or hi < lo:
                raise ValueError("ranges must be nonnegative and ordered")


def _layer_sizes(n: int, depth: int) -> list[int]:
    base, extra = divmod(n, depth)
    return [base + (1 if i < extra else 0) for i in range(depth)]


def _draw(rng: np.random.Generator, lo: float, hi: float) -> float:
    return lo if lo == hi else float(rng.uniform(lo, hi))


def gen_random_workload(spec: GenSpec) -> SchedGraph:
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    layers: list[list[str]] = []
    next_id = 0
    for size in _layer_sizes(spec.n_nodes, spec.depth):
        layers.append([f"n{next_id + k}" for k in range(size)])
        next_id += size

    nodes = [
        Node(id=nid, mem=_draw(rng, *spec.mem_range))
        for layer in layers
        for nid in layer
    ]

    # Edge presence is decided before any cost is drawn so that, for a fixed
    # seed, raising the density only ever adds edges (the presence draws are
    # consumed in the same order regardless of the threshold).
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()

    def add_pair(src: str, dst: str):
        if (src, dst) not in seen:
            seen.add((src, dst))
            pairs.append((src, dst))

    # forced predecessor in the previous layer keeps the depth exact
    for li in range(1, spec.depth):
        prev = layers[li - 1]
        for dst in layers[li]:
            add_pair(prev[int(rng.integers(len(prev)))], dst)
    # density-scaled extra edges, decaying with layer distance
    for li in range(spec.depth):
        for lj in range(li + 1, spec.depth):
            p = spec.density * _SKIP_DECAY ** (lj - li - 1)
            for src in layers[li]:
                hits = rng.uniform(size=len(layers[lj])) < p
                for dst, hit in zip(layers[lj], hits):
                    if hit:
                        add_pair(src, dst)

    edges = [
        Edge(src=src, dst=dst, comm=_draw(rng, *spec.comm_range))
        for src, dst in pairs
    ]
    g = SchedGraph(nodes=nodes, edges=edges)
    assert not validate(g)
    return g


def shape_stats(g: SchedGraph) -> dict:
    """Node/edge counts, longest-path depth (in nodes), mean out-degree."""
    n = g.n_nodes
    if n == 0:
        return {"n_nodes": 0, "n_edges": 0, "depth": 0, "avg_out_degree": 0.0}
    from .graph import _kahn_order

    order = _kahn_order(g)
    assert order is not None
    longest = [1] * n
    succs = g.successors()
    for v in reversed(order):
        for w, _ in succs[v]:
            longest[v] = max(longest[v], 1 + longest[w])
    return {
        "n_nodes": n,
        "n_edges": len(g.edges),
        "depth": max(longest),
        "avg_out_degree": len(g.edges) / n,
    }
