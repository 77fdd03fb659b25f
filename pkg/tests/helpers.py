"""Shared fuzzing utilities for the test suite."""
from __future__ import annotations

from itertools import product

import numpy as np

from diffsched.graph import (
    Edge,
    Node,
    SchedGraph,
    _kahn_order,
    check_legal,
    latest_stages,
)


def random_dag(
    rng: np.random.Generator,
    n_nodes: int,
    edge_prob: float = 0.4,
    c_choices=(0,),
    comm_choices=(1.0,),
    mem_choices=(1.0,),
) -> SchedGraph:
    """Random DAG over declaration order: edges only go index-forward."""
    nodes = [Node(id=f"n{i}", mem=float(rng.choice(mem_choices))) for i in range(n_nodes)]
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.uniform() < edge_prob:
                edges.append(
                    Edge(
                        src=f"n{i}",
                        dst=f"n{j}",
                        comm=float(rng.choice(comm_choices)),
                        sdc_c=int(rng.choice(c_choices)),
                    )
                )
    return SchedGraph(nodes=nodes, edges=edges)


def enumerate_legal(g: SchedGraph, latency: int):
    """Naive full enumeration of legal schedules (no pruning): the slow,
    independent cross-check for the oracle and feasibility bounds."""
    for combo in product(range(latency), repeat=g.n_nodes):
        stages = {n.id: s for n, s in zip(g.nodes, combo)}
        if not check_legal(g, stages, latency):
            yield stages


def random_legal_schedule(
    g: SchedGraph, latency: int, rng: np.random.Generator
) -> dict[str, int]:
    """Uniform-ish random legal schedule: each node draws from its currently
    feasible stage window in topological order. Requires L >= L_min."""
    order = _kahn_order(g)
    assert order is not None
    preds = g.predecessors()
    hi = latest_stages(g, latency)
    stages = [0] * g.n_nodes
    for v in order:
        lo = 0
        for u, c in preds[v]:
            lo = max(lo, stages[u] - c)
        assert lo <= hi[v]
        stages[v] = int(rng.integers(lo, hi[v] + 1))
    return {n.id: s for n, s in zip(g.nodes, stages)}
