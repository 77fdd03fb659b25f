"""Gradient-descent scheduling loop.

Each epoch: build a fresh tape, sample a legal hard schedule with the
constrained Gumbel-Softmax sampler at the annealed temperature, evaluate the
training loss on the hard one-hots, backpropagate, and take an Adam/AdamW
step on the per-node logit matrix. The best schedule is tracked by the
discrete LP objective (comm_total + ratio * peak_mem), not by the training
loss, since the loss is a surrogate.

The entropy term is trained in its spread-seeking form (ln L minus the
stage-memory entropy): driving memory toward an even split is what lowers
peak memory, which a large ratio/lambda prioritizes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tape
from .graph import InfeasibleError, SchedGraph, min_feasible_latency
from .losses import comm_loss, discrete_metrics, spread_loss
from .sampler import sample_schedule


@dataclass
class RunConfig:
    L: int
    epochs: int = 500
    lr: float = 0.05
    lam: float = 10.0
    ratio: float = 10.0
    tau_start: float = 1.0
    tau_end: float = 0.1
    optimizer: str = "adam"  # "adam" | "adamw"
    weight_decay: float = 0.01
    seed: int = 0
    init_bias: float = 3.0
    timeout_ms: int | None = None
    sample_interval_ms: int | None = None

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (self.tau_start >= self.tau_end > 0):
            raise ValueError("need tau_start >= tau_end > 0")
        if self.optimizer not in ("adam", "adamw"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lam < 0 or self.ratio < 0:
            raise ValueError("lambda and ratio must be nonnegative")


@dataclass
class TrajectoryPoint:
    epoch: int
    wall_ms: int
    loss_total: float
    loss_entropy: float
    loss_comm: float
    peak_mem: float
    comm_total: float
    lp_objective: float
    best_so_far: float


@dataclass
class RunResult:
    best_schedule: dict[str, int]
    best_objective: float
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    config: RunConfig | None = None


def tau_schedule(epoch: int, epochs: int, tau_start: float, tau_end: float) -> float:
    """Exponential interpolation from tau_start to tau_end over all epochs."""
    if epochs <= 1:
        return tau_start
    return tau_start * (tau_end / tau_start) ** (epoch / (epochs - 1))


def init_params(g: SchedGraph, config: RunConfig, rng: np.random.Generator) -> np.ndarray:
    """Logit matrix |V| x L. Source nodes get a bias toward stage 0; all
    other rows start as small uniform noise."""
    n = g.n_nodes
    weights = rng.uniform(-0.5, 0.5, size=(n, config.L))
    has_pred = [False] * n
    for e in g.edges:
        has_pred[g.node_index(e.dst)] = True
    for v in range(n):
        if not has_pred[v]:
            weights[v] = 0.0
            weights[v, 0] = config.init_bias
    return weights


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(
    weights: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> np.ndarray:
    """One Adam step with bias correction; nonzero weight_decay applies the
    decoupled (AdamW) decay before the Adam delta."""
    if weight_decay:
        weights = weights * (1.0 - lr * weight_decay)
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    return weights - lr * m_hat / (np.sqrt(v_hat) + eps)


def run(g: SchedGraph, config: RunConfig, on_epoch=None) -> RunResult:
    """Full optimization run; deterministic given (graph, config, seed)
    apart from the recorded wall-clock times.

    ``on_epoch``, if given, is called with (epoch, stages) after every
    epoch's hard schedule is drawn; stages are indexed by declaration order.
    """
    config.validate()
    l_min = min_feasible_latency(g)
    if config.L < l_min:
        raise InfeasibleError(
            f"latency {config.L} below minimum feasible latency {l_min}"
        )

    rng = np.random.default_rng(config.seed)
    weights = init_params(g, config, rng)
    state = AdamState(m=np.zeros_like(weights), v=np.zeros_like(weights))
    mems = [n.mem for n in g.nodes]
    wd = config.weight_decay if config.optimizer == "adamw" else 0.0

    best_obj = float("inf")
    best_stages: dict[str, int] = {}
    trajectory: list[TrajectoryPoint] = []
    t0 = time.monotonic()

    for epoch in range(config.epochs):
        if config.timeout_ms is not None:
            if (time.monotonic() - t0) * 1000.0 > config.timeout_ms:
                break
        tau = tau_schedule(epoch, config.epochs, config.tau_start, config.tau_end)
        sampled = sample_schedule(g, weights, tau, rng)
        if on_epoch is not None:
            on_epoch(epoch, sampled.stages)
        tape: Tape = sampled.tape

        l_spread = spread_loss(tape, sampled.hards, mems, config.L)
        l_comm = comm_loss(tape, sampled.hards, g, config.L)
        total = tape.add(tape.mul(l_spread, tape.constant([config.lam])), l_comm)

        grads = tape.backward(total)
        grad_mat = np.stack([grads[p.idx] for p in sampled.params])
        weights = adam_step(
            weights, grad_mat, state, config.lr, weight_decay=wd
        )

        metrics = discrete_metrics(g, sampled.stages, config.L, config.ratio)
        if metrics.lp_objective < best_obj:
            best_obj = metrics.lp_objective
            best_stages = {n.id: s for n, s in zip(g.nodes, sampled.stages)}
        trajectory.append(
            TrajectoryPoint(
                epoch=epoch,
                wall_ms=int((time.monotonic() - t0) * 1000.0),
                loss_total=float(total.value[0]),
                loss_entropy=float(l_spread.value[0]),
                loss_comm=float(l_comm.value[0]),
                peak_mem=metrics.peak_mem,
                comm_total=metrics.comm_total,
                lp_objective=metrics.lp_objective,
                best_so_far=best_obj,
            )
        )
    return RunResult(
        best_schedule=best_stages,
        best_objective=best_obj,
        trajectory=trajectory,
        config=config,
    )


def run_restarts(g: SchedGraph, config: RunConfig, n_seeds: int) -> RunResult:
    """Independent restarts with derived seeds; best objective wins."""
    best: RunResult | None = None
    for i in range(n_seeds):
        result = run(g, replace(config, seed=config.seed + i))
        if best is None or result.best_objective < best.best_objective:
            best = result
    assert best is not None
    return best
