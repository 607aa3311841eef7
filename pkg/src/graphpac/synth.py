"""Planted-partition graphs with known ground truth and exact expected loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, EdgeDataset, NodeSpace
from .model import Assignment, ClusterModel, ClusterWeights, predict_edges

WEIGHT_MODELS = ("uniform", "bernoulli")


@dataclass(frozen=True)
class PlantedPartitionSpec:
    """Generator settings.

    ``weight_model="uniform"`` draws each weight as the block-pair mean
    plus uniform noise on [-weight_noise, weight_noise], truncated to
    [0, 1]. ``"bernoulli"`` draws 0/1 weights with the block-pair mean as
    success probability (weight_noise is ignored).

    With ``sample_size`` unset each unordered pair is observed at most
    once, independently with probability ``edge_observation_rate``.
    Setting ``sample_size`` instead draws that many i.i.d. (pair, weight)
    samples, uniform over pairs and with repetition.
    """

    num_nodes: int
    num_blocks: int
    intra_weight_mean: float
    inter_weight_mean: float
    weight_noise: float = 0.0
    edge_observation_rate: float = 1.0
    seed: int = 0
    weight_model: str = "uniform"
    sample_size: int | None = None

    def __post_init__(self):
        if self.num_nodes < 2:
            raise ValueError("need at least 2 nodes")
        if not 1 <= self.num_blocks <= self.num_nodes:
            raise ValueError("num_blocks must lie in [1, num_nodes]")
        for name in ("intra_weight_mean", "inter_weight_mean"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.weight_noise < 0:
            raise ValueError("weight_noise must be nonnegative")
        if not 0.0 < self.edge_observation_rate <= 1.0:
            raise ValueError("edge_observation_rate must lie in (0, 1]")
        if self.weight_model not in WEIGHT_MODELS:
            raise ValueError(f"weight_model must be one of {WEIGHT_MODELS}")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be positive")


@dataclass(frozen=True, eq=False)
class TruthDistribution:
    """Uniform distribution over unordered node pairs i < j with block-pair weights.

    For the uniform weight model every pair weight is uniform on
    ``[low, high]``; for the Bernoulli model it is 0/1 with mean ``mean``.
    """

    labels: np.ndarray
    block_means: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    low: np.ndarray
    high: np.ndarray
    mean: np.ndarray
    weight_model: str

    @property
    def num_nodes(self) -> int:
        return self.labels.size

    def variance(self) -> np.ndarray:
        """Conditional weight variance of every pair."""
        if self.weight_model == "bernoulli":
            return self.mean * (1.0 - self.mean)
        return (self.high - self.low) ** 2 / 12.0

    def ground_truth_model(self) -> ClusterModel:
        """Hard planted partition predicting every block pair's mean weight."""
        k = self.block_means.shape[0]
        g = np.zeros((k, k))
        a, b = self.labels[self.src], self.labels[self.dst]
        for c1 in range(k):
            for c2 in range(k):
                sel = ((a == c1) & (b == c2)) | ((a == c2) & (b == c1))
                g[c1, c2] = self.mean[sel].mean() if sel.any() else self.block_means[c1, c2]
        return ClusterModel(Assignment.hard(self.labels, k), ClusterWeights(g))


def _truncated_bounds(mean: np.ndarray, noise: float) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(mean - noise, 0.0), np.minimum(mean + noise, 1.0)


def generate(spec: PlantedPartitionSpec) -> tuple[EdgeDataset, np.ndarray, TruthDistribution]:
    """Draw a dataset; returns (data, block labels, truth)."""
    rng = np.random.default_rng(spec.seed)
    n, k = spec.num_nodes, spec.num_blocks
    labels = np.arange(n) % k
    block_means = np.full((k, k), spec.inter_weight_mean)
    np.fill_diagonal(block_means, spec.intra_weight_mean)

    src, dst = np.triu_indices(n, k=1)
    nominal = block_means[labels[src], labels[dst]]
    if spec.weight_model == "uniform":
        low, high = _truncated_bounds(nominal, spec.weight_noise)
        mean = 0.5 * (low + high)
    else:
        low, high = np.zeros_like(nominal), np.ones_like(nominal)
        mean = nominal
    truth = TruthDistribution(labels, block_means, src, dst, low, high, mean, spec.weight_model)

    if spec.sample_size is None:
        picked = np.flatnonzero(rng.random(src.size) < spec.edge_observation_rate)
        multiset = False
    else:
        picked = np.sort(rng.integers(0, src.size, size=spec.sample_size))
        multiset = True
    if picked.size == 0:
        raise DataError("generator spec produced no observed edges")
    if spec.weight_model == "uniform":
        w = rng.uniform(low[picked], high[picked])
    else:
        w = (rng.random(picked.size) < mean[picked]).astype(float)
    nodes = NodeSpace(n, tuple(f"n{x}" for x in range(n)))
    data = EdgeDataset(nodes, src[picked], dst[picked], w, symmetric=True, multiset=multiset)
    return data, labels, truth


def exact_expected_loss(model: ClusterModel, truth: TruthDistribution) -> float:
    """Expected quadratic loss of the model under the generating distribution.

    Enumerates every node pair; per pair the risk is the conditional
    weight variance plus the squared bias of the prediction.
    """
    pred = predict_edges(model, truth.src, truth.dst)
    risk = truth.variance() + (truth.mean - pred) ** 2
    return float(risk.mean())


def sample_pairs(truth: TruthDistribution, size: int, rng: np.random.Generator):
    """Draw i.i.d. (src, dst, weight) triples from the truth distribution."""
    idx = rng.integers(0, truth.src.size, size=size)
    if truth.weight_model == "uniform":
        w = rng.uniform(truth.low[idx], truth.high[idx])
    else:
        w = (rng.random(size) < truth.mean[idx]).astype(float)
    return truth.src[idx], truth.dst[idx], w


def format_labels(labels: np.ndarray, nodes: NodeSpace) -> str:
    return "".join(f"{nodes.label(x)}\t{int(c)}\n" for x, c in enumerate(labels))


def parse_labels(text: str) -> dict[str, int]:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        node, label = line.split()
        out[node] = int(label)
    return out
