"""Cluster-based edge-weight predictor, its quadratic loss, and the MI regularizer.

Matrices are stored node-major: ``q`` has shape ``(|X|, |C|)`` with
``q[x, c] = q(c|x)``, and ``g`` has shape ``(|C|, |C|)``. The prediction
for an edge (i, j) is ``q[i] @ g @ q[j]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import lsq_linear

from .data import DataError, EdgeDataset

ROW_TOL = 1e-9
EMPTY_CELL_MASS = 1e-12


@dataclass(frozen=True, eq=False)
class Assignment:
    """Soft clustering q(c|x), one row-stochastic row per node."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[1] < 1:
            raise ValueError("assignment must be a 2-d array with at least one cluster")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("assignment entries must be finite and nonnegative")
        if np.any(np.abs(q.sum(axis=1) - 1.0) > ROW_TOL):
            raise ValueError("assignment rows must sum to 1")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def num_nodes(self) -> int:
        return self.q.shape[0]

    @property
    def num_clusters(self) -> int:
        return self.q.shape[1]

    @classmethod
    def hard(cls, labels, num_clusters: int | None = None) -> "Assignment":
        labels = np.asarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1 if num_clusters is None else num_clusters
        q = np.zeros((labels.size, k))
        q[np.arange(labels.size), labels] = 1.0
        return cls(q)

    @classmethod
    def normalized(cls, q) -> "Assignment":
        q = np.asarray(q, dtype=float)
        return cls(q / q.sum(axis=1, keepdims=True))

    def labels(self) -> np.ndarray:
        """Most probable cluster of every node."""
        return np.argmax(self.q, axis=1)

    def marginal(self) -> np.ndarray:
        return self.q.mean(axis=0)


@dataclass(frozen=True, eq=False)
class ClusterWeights:
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("cluster weights must be a square matrix")
        if np.any(g < 0) or np.any(g > 1) or not np.all(np.isfinite(g)):
            raise ValueError("cluster weights must lie in [0, 1]")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def num_clusters(self) -> int:
        return self.g.shape[0]

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.g, self.g.T, rtol=0, atol=tol))


@dataclass(frozen=True, eq=False)
class ClusterModel:
    assignment: Assignment
    weights: ClusterWeights

    def __post_init__(self):
        if self.assignment.num_clusters != self.weights.num_clusters:
            raise ValueError("assignment and cluster weights disagree on |C|")

    @property
    def q(self) -> np.ndarray:
        return self.assignment.q

    @property
    def g(self) -> np.ndarray:
        return self.weights.g

    @property
    def num_clusters(self) -> int:
        return self.assignment.num_clusters

    @property
    def num_nodes(self) -> int:
        return self.assignment.num_nodes

    def permuted(self, perm) -> "ClusterModel":
        """Relabel clusters: new cluster k is old cluster ``perm[k]``."""
        perm = np.asarray(perm)
        return ClusterModel(Assignment(self.q[:, perm]), ClusterWeights(self.g[np.ix_(perm, perm)]))


def predict_edge(model: ClusterModel, i: int, j: int) -> float:
    """Mixture prediction sum_{c1,c2} q(c1|i) g(c1,c2) q(c2|j)."""
    n = model.num_nodes
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"node index out of range for |X|={n}")
    return float(model.q[i] @ model.g @ model.q[j])


def predict_edges(model: ClusterModel, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Vectorized :func:`predict_edge` over index arrays."""
    return np.einsum("ec,ec->e", model.q[src] @ model.g, model.q[dst])


def reconstruction(model: ClusterModel) -> np.ndarray:
    """Full |X| x |X| matrix of predictions (Q G Q^T in node-major layout)."""
    return model.q @ model.g @ model.q.T


def residuals(model: ClusterModel, data: EdgeDataset) -> np.ndarray:
    return predict_edges(model, data.src, data.dst) - data.weight


def empirical_loss(model: ClusterModel, data: EdgeDataset) -> float:
    """Mean squared error of the mixture prediction over observed edges."""
    if data.num_edges == 0:
        raise DataError("empirical loss of an empty dataset")
    r = residuals(model, data)
    return float(r @ r / data.num_edges)


def loss_gradient(model: ClusterModel, data: EdgeDataset) -> np.ndarray:
    """Partial derivatives of the empirical loss with respect to every q(c|x).

    ``g`` is held fixed. Each stored edge contributes through both of its
    endpoints, which also covers symmetric datasets that store one copy
    per pair. Returns an array shaped like ``model.q``.
    """
    if data.num_edges == 0:
        raise DataError("gradient over an empty dataset")
    r = residuals(model, data)
    rmat = data.sparse_values(r)
    q, g = model.q, model.g
    return 2.0 * (rmat @ (q @ g.T) + rmat.T @ (q @ g)) / data.num_edges


def cluster_mass(assignment: Assignment, data: EdgeDataset) -> np.ndarray:
    """Per-cell observation mass sum_{(i,j)} q(c1|i) q(c2|j)."""
    q = assignment.q
    return q.T @ (data.sparse_mask @ q)


def cell_mean_weights(assignment: Assignment, data: EdgeDataset) -> ClusterWeights:
    """Mass-weighted mean weight of every cluster-pair cell.

    This minimizes, cell by cell, the loss of the randomized predictor
    that draws (c1, c2) from the assignment and outputs g(c1, c2). Cells
    with no mass fall back to the global mean weight. For symmetric data
    the edge set is counted in both orientations so the result is
    symmetric.
    """
    if data.num_edges == 0:
        raise DataError("cluster weights from an empty dataset")
    q = assignment.q
    sw, s = data.sparse_weights, data.sparse_mask
    num = q.T @ (sw @ q)
    den = q.T @ (s @ q)
    if data.symmetric:
        num = num + num.T
        den = den + den.T
    mean = float(data.weight.mean())
    g = np.full_like(num, mean)
    full = den >= EMPTY_CELL_MASS
    g[full] = num[full] / den[full]
    return ClusterWeights(np.clip(g, 0.0, 1.0))


def _normal_equations(q: np.ndarray, data: EdgeDataset):
    """Gram matrix and moment vector of the per-edge features vec(q_i q_j^T).

    Built from per-node outer products so the cost is O(N |C|^2 + |X| |C|^4)
    rather than materializing an N x |C|^2 design matrix.
    """
    n, k = q.shape
    s, sw = data.sparse_mask, data.sparse_weights
    outer = np.einsum("xa,xb->xab", q, q).reshape(n, k * k)
    # gram[(a,c),(b,d)] = sum_ij S_ij q_i[a] q_i[c] q_j[b] q_j[d]
    gram = (outer.T @ (s @ outer)).reshape(k, k, k, k).transpose(0, 2, 1, 3).reshape(k * k, k * k)
    moment = (q.T @ (sw @ q)).reshape(k * k)
    mass = (q.T @ (s @ q)).reshape(k * k)
    if data.symmetric:
        # count each stored pair in both orientations
        perm = np.arange(k * k).reshape(k, k).T.reshape(-1)
        gram = gram + gram[np.ix_(perm, perm)]
        moment = moment + moment[perm]
        mass = mass + mass[perm]
    return gram, moment, mass


def ml_cluster_weights(assignment: Assignment, data: EdgeDataset) -> ClusterWeights:
    """Cluster weights minimizing the empirical loss for a fixed assignment.

    Solves the least-squares problem over G in [0, 1]^{|C| x |C|} for the
    mixture prediction. With hard assignments this is exactly the block
    mean of every cell (:func:`cell_mean_weights`); with soft assignments
    the cells are coupled and the block means are no longer optimal.

    The problem is solved for the offset from the global mean weight with
    a vanishing ridge, so directions the data does not determine (in
    particular cells with no mass) stay at the global mean.
    """
    if data.num_edges == 0:
        raise DataError("cluster weights from an empty dataset")
    q = assignment.q
    k = q.shape[1]
    mean = float(data.weight.mean())
    gram, moment, mass = _normal_equations(q, data)
    rhs = moment - mean * mass
    ridge = 1e-12 * max(float(np.trace(gram)) / (k * k), 1e-300)
    h = gram + ridge * np.eye(k * k)
    chol = scipy.linalg.cho_factor(h, lower=True)
    x = scipy.linalg.cho_solve(chol, rhs)
    lo, hi = -mean, 1.0 - mean
    if np.any(x < lo) or np.any(x > hi):
        # box-constrained quadratic: min ||L^T x - L^{-1} rhs||^2
        lower = np.tril(chol[0])
        target = scipy.linalg.solve_triangular(lower, rhs, lower=True)
        x = lsq_linear(lower.T, target, bounds=(lo, hi), method="bvls", tol=1e-14).x
    g = np.clip(mean + x.reshape(k, k), 0.0, 1.0)
    if data.symmetric:
        g = 0.5 * (g + g.T)
    return ClusterWeights(g)


def fit_weights(assignment: Assignment, data: EdgeDataset) -> ClusterModel:
    return ClusterModel(assignment, ml_cluster_weights(assignment, data))


def mutual_information(assignment: Assignment) -> float:
    """I(X;C) in nats under a uniform distribution over nodes."""
    q = assignment.q
    if np.all(q == q[0]):
        return 0.0
    qbar = q.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, q * np.log(q / qbar), 0.0)
    return max(0.0, float(terms.sum() / q.shape[0]))


def global_mean_model(data: EdgeDataset, num_nodes: int | None = None) -> ClusterModel:
    """The single-cluster model predicting the mean observed weight."""
    n = data.num_nodes if num_nodes is None else num_nodes
    return ClusterModel(Assignment(np.ones((n, 1))),
                        ClusterWeights([[float(data.weight.mean())]]))


# --- serialization --------------------------------------------------------

def format_model(model: ClusterModel, symmetric: bool = False) -> str:
    n, k = model.q.shape
    lines = [f"graphpac-model {n} {k} {int(symmetric)}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in model.q]
    lines += [" ".join(repr(float(v)) for v in row) for row in model.g]
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> tuple[ClusterModel, bool]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    head = lines[0].split()
    if len(head) != 4 or head[0] != "graphpac-model":
        raise DataError("not a model file")
    n, k, symmetric = int(head[1]), int(head[2]), bool(int(head[3]))
    if len(lines) != 1 + n + k:
        raise DataError(f"model file should have {1 + n + k} rows, found {len(lines)}")
    q = np.array([[float(v) for v in ln.split()] for ln in lines[1:1 + n]])
    g = np.array([[float(v) for v in ln.split()] for ln in lines[1 + n:]])
    if q.shape != (n, k) or g.shape != (k, k):
        raise DataError("model matrix has the wrong shape")
    return ClusterModel(Assignment(q), ClusterWeights(g)), symmetric
