"""Alternating-projection minimization of beta*N*loss + |X|*I(X;C)."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .data import EdgeDataset
from .model import (
    Assignment,
    ClusterModel,
    empirical_loss,
    fit_weights,
    loss_gradient,
    mutual_information,
)

log = logging.getLogger(__name__)

ROW_FLOOR = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    beta: float
    num_clusters: int
    anneal: bool = True
    anneal_start: float | None = None  # None means 1/N
    anneal_factor: float = 2.0
    iters_per_beta: int = 5
    noise_scale: float = 1e-2
    restarts: int = 10
    seed: int = 0
    max_total_iters: int = 100_000
    safeguard: bool = True
    max_halvings: int = 30

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.num_clusters < 1:
            raise ValueError("need at least one cluster")
        if self.anneal_start is not None and not self.anneal_start > 0:
            raise ValueError("anneal_start must be positive")
        if not self.anneal_factor > 1:
            raise ValueError("anneal_factor must exceed 1")
        if self.iters_per_beta < 1 or self.restarts < 1 or self.max_total_iters < 1:
            raise ValueError("iteration and restart counts must be positive")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be nonnegative")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")


@dataclass(frozen=True)
class TraceRecord:
    restart: int
    beta: float
    iter: int
    objective: float
    loss: float
    mi: float


@dataclass
class OptimizerTrace:
    records: list[TraceRecord] = field(default_factory=list)
    hit_iteration_cap: bool = False
    best_restart: int = -1
    best_iter: int = -1

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["restart", "beta", "iter", "objective", "loss", "mi"])
        for r in self.records:
            writer.writerow([r.restart, f"{r.beta:.12g}", r.iter, f"{r.objective:.12g}",
                             f"{r.loss:.12g}", f"{r.mi:.12g}"])
        return out.getvalue()


def objective(model: ClusterModel, data: EdgeDataset, beta: float) -> float:
    return beta * data.num_edges * empirical_loss(model, data) + model.num_nodes * mutual_information(model.assignment)


def _project(qbar: np.ndarray, grad: np.ndarray, scale: float,
             q: np.ndarray | None = None, eta: float = 1.0) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logits = eta * (np.log(qbar)[None, :] - scale * grad)
        if eta < 1.0:
            logits = logits + (1.0 - eta) * np.log(q)
    top = logits.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise FloatingPointError("assignment row degenerated to all zeros")
    p = np.exp(logits - top)
    return p / p.sum(axis=1, keepdims=True)


def alternating_step(model: ClusterModel, data: EdgeDataset, beta: float) -> ClusterModel:
    """One alternating projection: reweight assignments, then refit G.

    q'(c|x) is proportional to qbar(c) * exp(-beta * N * dL/dq(c|x)),
    normalized per node in the log domain, and G is refit on q'.
    """
    return damped_step(model, data, beta, 1.0)


def damped_step(model: ClusterModel, data: EdgeDataset, beta: float, eta: float) -> ClusterModel:
    """Geometric interpolation between the current q and the full update.

    q'(c|x) is proportional to q(c|x)^(1-eta) * [qbar(c) exp(-beta N dL/dq)]^eta,
    followed by a refit of G. ``eta = 1`` is :func:`alternating_step`,
    ``eta -> 0`` leaves the assignment unchanged.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    qbar = model.assignment.marginal()
    grad = loss_gradient(model, data)
    q = _project(qbar, grad, beta * data.num_edges, model.q, eta)
    return fit_weights(Assignment(q), data)


def safeguarded_step(model: ClusterModel, data: EdgeDataset, beta: float,
                     max_halvings: int = 30) -> tuple[ClusterModel, float]:
    """Full alternating step, damped by halving eta until the objective does not rise.

    Returns the new model and the accepted eta (0.0 if no damping helped,
    in which case the input model is returned unchanged).
    """
    current = objective(model, data, beta)
    eta = 1.0
    for _ in range(max_halvings + 1):
        new = damped_step(model, data, beta, eta)
        if objective(new, data, beta) <= current:
            return new, eta
        eta *= 0.5
    return model, 0.0


def _initial_assignment(num_nodes: int, num_clusters: int, rng: np.random.Generator) -> Assignment:
    q = np.full((num_nodes, num_clusters), 1.0 / num_clusters)
    q *= rng.uniform(0.9, 1.1, size=q.shape)
    return Assignment.normalized(q)


def _inject_noise(assignment: Assignment, scale: float, rng: np.random.Generator) -> Assignment:
    k = assignment.num_clusters
    q = assignment.q + rng.uniform(-scale / k, scale / k, size=assignment.q.shape)
    return Assignment.normalized(np.maximum(q, ROW_FLOOR))


def beta_schedule(config: OptimizerConfig, sample_size: int) -> list[float]:
    """Annealing ladder from the start value up to the target, geometric steps."""
    if not config.anneal:
        return [config.beta]
    start = config.anneal_start if config.anneal_start is not None else 1.0 / sample_size
    betas = []
    b = start
    while b < config.beta * (1 - 1e-12):
        betas.append(b)
        b *= config.anneal_factor
    betas.append(config.beta)
    return betas


def optimize(data: EdgeDataset, config: OptimizerConfig) -> tuple[ClusterModel, OptimizerTrace]:
    """Multi-restart annealed alternating projections.

    Every iterate is scored by the objective at the target beta and the
    best one over all restarts is returned; ties go to the earlier
    restart. Plain alternating steps are not monotone in the objective;
    with ``config.safeguard`` each step is damped until the objective at
    the current beta does not increase.
    """
    trace = OptimizerTrace()
    schedule = beta_schedule(config, data.num_edges)
    best: tuple[float, int, int] | None = None
    best_model: ClusterModel | None = None
    total = 0

    def consider(model: ClusterModel, restart: int, it: int, beta: float) -> None:
        nonlocal best, best_model
        loss = empirical_loss(model, data)
        mi = mutual_information(model.assignment)
        trace.records.append(TraceRecord(restart, beta, it, beta * data.num_edges * loss
                                         + model.num_nodes * mi, loss, mi))
        target = config.beta * data.num_edges * loss + model.num_nodes * mi
        key = (target, restart, it)
        if best is None or key < best:
            best, best_model = key, model

    for restart in range(config.restarts):
        rng = np.random.default_rng([config.seed, restart])
        model = fit_weights(_initial_assignment(data.num_nodes, config.num_clusters, rng), data)
        it = 0
        consider(model, restart, it, schedule[0])
        for level, beta in enumerate(schedule):
            if level > 0 and config.noise_scale > 0:
                model = fit_weights(_inject_noise(model.assignment, config.noise_scale, rng), data)
            for _ in range(config.iters_per_beta):
                if total >= config.max_total_iters:
                    trace.hit_iteration_cap = True
                    break
                if config.safeguard:
                    model, _ = safeguarded_step(model, data, beta, config.max_halvings)
                else:
                    model = alternating_step(model, data, beta)
                it += 1
                total += 1
                consider(model, restart, it, beta)
            if trace.hit_iteration_cap:
                break
        if trace.hit_iteration_cap:
            log.warning("iteration cap %d reached; returning best model so far", config.max_total_iters)
            break

    trace.best_restart, trace.best_iter = best[1], best[2]
    return best_model, trace
