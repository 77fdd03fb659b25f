"""Constrained Gumbel-Softmax sampling.

Each node draws a tempered Gumbel-Softmax sample over its L candidate
stages, multiplied elementwise by a 0/1 feasibility mask derived from its
predecessors' already-sampled stages. The mask for one predecessor placed at
stage t under constraint ``stage(parent) - stage(child) <= c`` allows the
child stages >= t - c (clamped at 0); multiple predecessors intersect.
Masking guarantees every hard sample satisfies all difference constraints.

Masks are built from the predecessors' hard samples and enter the tape as
constants: the learning signal flows only through each node's own soft
vector (the straight-through path). No renormalization is applied after
masking; argmax is invariant to it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import DiffVector, Tape
from .graph import InfeasibleError, SchedGraph, _kahn_order, latest_stages

# Uniform draws are clamped away from {0, 1} before the double-log transform.
_U_CLAMP = 1e-12


def gumbel_noise(rng: np.random.Generator, length: int) -> np.ndarray:
    """i.i.d. standard Gumbel(0,1) draws via -log(-log(U))."""
    u = rng.uniform(size=length)
    u = np.clip(u, _U_CLAMP, 1.0 - _U_CLAMP)
    return -np.log(-np.log(u))


def mask_from_parent(parent_onehot: np.ndarray, c: int, length: int) -> np.ndarray:
    """Feasible-stage mask for a child given one parent's hard sample.

    Child stages >= argmax(parent) - c are allowed. For c <= 0 this is the
    cumsum of the parent one-hot rolled right by |c|; positive c clamps the
    minimum stage at 0 (pure slack).
    """
    t = int(np.asarray(parent_onehot).argmax())
    lo = t - c
    if lo > length - 1:
        raise InfeasibleError(
            f"constraint needs stage {lo} but only {length} stages exist"
        )
    mask = np.zeros(length)
    mask[max(lo, 0):] = 1.0
    return mask


def combine_masks(masks: list[np.ndarray], length: int) -> np.ndarray:
    """Elementwise AND of 0/1 masks; the empty list gives the all-ones mask."""
    if not masks:
        return np.ones(length)
    out = masks[0]
    for m in masks[1:]:
        out = np.minimum(out, m)
    if out.max() == 0.0:
        raise InfeasibleError("combined constraint mask has no feasible stage")
    return out


def constrained_sample(
    tape: Tape,
    logits: DiffVector,
    mask: np.ndarray,
    noise: np.ndarray,
    tau: float,
) -> tuple[DiffVector, DiffVector]:
    """One constrained Gumbel-Softmax draw.

    soft = softmax(logits + g, tau) * mask, hard = one_hot(argmax(soft))
    with a straight-through backward. The hard argmax always lands on a
    masked-in stage because masked-out entries are exactly zero and the
    softmax is strictly positive elsewhere.
    """
    y = tape.softmax(logits, tau, shift=noise)
    if mask.min() == 1.0:  # all-ones mask: the multiply is the identity
        soft = y
    else:
        soft = tape.mul(y, tape.constant(mask))
    hard = tape.straight_through_onehot(soft)
    return soft, hard


@dataclass
class SampledSchedule:
    """One epoch's draw: everything indexed by node declaration order."""

    stages: list[int]
    softs: list[DiffVector]
    hards: list[DiffVector]
    params: list[DiffVector]
    tape: Tape


def sample_schedule(
    g: SchedGraph,
    weights: np.ndarray,
    tau: float,
    rng: np.random.Generator,
    tape: Tape | None = None,
) -> SampledSchedule:
    """Sample a full legal schedule in topological order.

    ``weights`` is the |V| x L logit matrix; one tape param is created per
    node so the caller can map gradients back to matrix rows.

    Besides the predecessor masks, each node is capped at its latest
    feasible stage (ALAP bound). Without the cap a node could sample a
    stage so late that a descendant bound by a negative constant has no
    legal stage left; with it, sampling never dead-ends when L is at least
    the minimum feasible latency.
    """
    n, latency = weights.shape
    if n != g.n_nodes:
        raise ValueError("weight matrix row count does not match node count")
    if tape is None:
        tape = Tape()
    order = _kahn_order(g)
    if order is None:
        raise ValueError("graph contains a cycle")
    preds = g.predecessors()
    hi = latest_stages(g, latency)
    cap_masks: dict[int, np.ndarray] = {}
    for v in range(n):
        if hi[v] < latency - 1:
            cap = np.zeros(latency)
            cap[: hi[v] + 1] = 1.0
            cap_masks[v] = cap

    stages = [0] * n
    softs: list[DiffVector] = [None] * n  # type: ignore[list-item]
    hards: list[DiffVector] = [None] * n  # type: ignore[list-item]
    params: list[DiffVector] = [None] * n  # type: ignore[list-item]
    for v in order:
        masks = [
            mask_from_parent(hards[u].value, c, latency) for u, c in preds[v]
        ]
        if v in cap_masks:
            masks.append(cap_masks[v])
        mask = combine_masks(masks, latency)
        logits = tape.param(weights[v])
        noise = gumbel_noise(rng, latency)
        soft, hard = constrained_sample(tape, logits, mask, noise, tau)
        params[v] = logits
        softs[v] = soft
        hards[v] = hard
        stages[v] = int(hard.value.argmax())
    return SampledSchedule(stages=stages, softs=softs, hards=hards, params=params, tape=tape)
