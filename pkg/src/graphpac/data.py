"""Weighted edge lists: parsing, weight scaling, and reproducible splits."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp


class DataError(ValueError):
    """Raised for malformed or inconsistent edge data."""


@dataclass(frozen=True)
class NodeSpace:
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 2:
            raise DataError(f"node space needs at least 2 nodes, got {self.size}")
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise DataError("number of labels does not match node space size")
            if len(set(self.labels)) != self.size:
                raise DataError("node labels must be distinct")

    def label(self, index: int) -> str:
        return self.labels[index] if self.labels is not None else str(index)


class EdgeObservation(NamedTuple):
    i: int
    j: int
    w: float


@dataclass(frozen=True, eq=False)
class EdgeDataset:
    """An observed sample of edge weights over a fixed node space.

    Edges are held column-wise in ``src``, ``dst`` and ``weight`` arrays.
    For symmetric datasets only one orientation of each pair is stored.
    ``multiset`` datasets may repeat a pair; this is the i.i.d. sampling
    regime used by the synthetic bound checks.
    """

    nodes: NodeSpace
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    symmetric: bool = False
    allow_self_loops: bool = False
    multiset: bool = False

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64).copy()
        dst = np.asarray(self.dst, dtype=np.int64).copy()
        weight = np.asarray(self.weight, dtype=float).copy()
        if not (src.shape == dst.shape == weight.shape) or src.ndim != 1:
            raise DataError("src, dst and weight must be 1-d arrays of equal length")
        n = self.nodes.size
        if src.size and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise DataError("edge endpoint outside the node space")
        if not np.all(np.isfinite(weight)):
            raise DataError("non-finite edge weight")
        if np.any(weight < 0.0) or np.any(weight > 1.0):
            raise DataError("edge weights must lie in [0, 1]")
        if not self.allow_self_loops and np.any(src == dst):
            raise DataError("self-loop found but self-loops are not enabled")
        if not self.multiset and src.size:
            a, b = (np.minimum(src, dst), np.maximum(src, dst)) if self.symmetric else (src, dst)
            keys = a * n + b
            if np.unique(keys).size != keys.size:
                raise DataError("duplicate edge in dataset")
        for arr in (src, dst, weight):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weight", weight)

    @property
    def num_nodes(self) -> int:
        return self.nodes.size

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def __len__(self) -> int:
        return self.num_edges

    def __iter__(self):
        for i, j, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            yield EdgeObservation(i, j, w)

    @property
    def edges(self) -> list[EdgeObservation]:
        return list(self)

    def subset(self, index: np.ndarray) -> "EdgeDataset":
        """Dataset restricted to the edges at ``index`` (same node space)."""
        index = np.asarray(index, dtype=np.int64)
        return EdgeDataset(self.nodes, self.src[index], self.dst[index], self.weight[index],
                           self.symmetric, self.allow_self_loops, self.multiset)

    def with_weights(self, weight: np.ndarray) -> "EdgeDataset":
        return EdgeDataset(self.nodes, self.src, self.dst, weight,
                           self.symmetric, self.allow_self_loops, self.multiset)

    @cached_property
    def sparse_mask(self) -> sp.csr_matrix:
        """Observation counts as a sparse |X| x |X| matrix."""
        return self.sparse_values(np.ones(self.num_edges))

    @cached_property
    def sparse_weights(self) -> sp.csr_matrix:
        return self.sparse_values(self.weight)

    def sparse_values(self, values: np.ndarray) -> sp.csr_matrix:
        # repeated (i, j) entries of multiset samples are summed
        n = self.num_nodes
        return sp.csr_matrix((values, (self.src, self.dst)), shape=(n, n))

    def mask(self) -> np.ndarray:
        """Dense 0/1 observation mask S (|X| x |X|)."""
        s = np.zeros((self.num_nodes, self.num_nodes))
        s[self.src, self.dst] = 1.0
        return s

    def weight_matrix(self) -> np.ndarray:
        """Dense weight matrix M, zero where unobserved."""
        m = np.zeros((self.num_nodes, self.num_nodes))
        m[self.src, self.dst] = self.weight
        return m

    def same_edges(self, other: "EdgeDataset") -> bool:
        return (self.nodes == other.nodes and self.symmetric == other.symmetric
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.weight, other.weight))


@dataclass(frozen=True)
class ParseOptions:
    symmetric: bool = False
    allow_self_loops: bool = False
    comment: str = "#"


class RawEdges(NamedTuple):
    """Parsed edges whose weights have not yet been mapped into [0, 1]."""

    nodes: NodeSpace
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    symmetric: bool
    allow_self_loops: bool


def _read_triples(text: str | Iterable[str], options: ParseOptions):
    lines = text.splitlines() if isinstance(text, str) else text
    index: dict[str, int] = {}
    labels: list[str] = []
    seen: dict[tuple[int, int], float] = {}
    src, dst, weight = [], [], []

    def node(label: str) -> int:
        k = index.get(label)
        if k is None:
            k = index[label] = len(labels)
            labels.append(label)
        return k

    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith(options.comment):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError(f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
        a, b, raw = (f.strip() for f in fields)
        try:
            w = float(raw)
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric weight {raw!r}") from None
        if not math.isfinite(w):
            raise DataError(f"line {lineno}: non-finite weight {raw!r}")
        i, j = node(a), node(b)
        if i == j and not options.allow_self_loops:
            raise DataError(f"line {lineno}: self-loop on {a!r}")
        if (i, j) in seen:
            raise DataError(f"line {lineno}: duplicate edge {a!r} -> {b!r}")
        if options.symmetric and (j, i) in seen:
            if seen[(j, i)] != w:
                raise DataError(f"line {lineno}: edge {a!r} -- {b!r} repeated with a different weight")
            continue
        seen[(i, j)] = w
        src.append(i)
        dst.append(j)
        weight.append(w)

    if not src:
        raise DataError("no edges found")
    return labels, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(weight)


def parse_raw_edges(text: str | Iterable[str], options: ParseOptions = ParseOptions()) -> RawEdges:
    labels, src, dst, weight = _read_triples(text, options)
    return RawEdges(NodeSpace(len(labels), tuple(labels)), src, dst, weight,
                    options.symmetric, options.allow_self_loops)


def parse_edge_list(text: str | Iterable[str], options: ParseOptions = ParseOptions()) -> EdgeDataset:
    """Parse ``src<TAB>dst<TAB>weight`` lines into an :class:`EdgeDataset`.

    Node labels are numbered in order of first appearance. Weights must
    already lie in [0, 1]; use :func:`parse_raw_edges` and
    :func:`scale_weights` for unbounded measurements.
    """
    raw = parse_raw_edges(text, options)
    if np.any(raw.weight < 0) or np.any(raw.weight > 1):
        bad = raw.weight[(raw.weight < 0) | (raw.weight > 1)][0]
        raise DataError(f"weight {bad!r} outside [0, 1]; enable scaling")
    return EdgeDataset(raw.nodes, raw.src, raw.dst, raw.weight, raw.symmetric, raw.allow_self_loops)


def read_edge_list(path: str | Path, options: ParseOptions = ParseOptions(),
                   scale: str = "none") -> EdgeDataset:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if scale == "none":
        return parse_edge_list(text, options)
    return scale_weights(parse_raw_edges(text, options), scale)


def format_edge_list(data: EdgeDataset) -> str:
    out = io.StringIO()
    for i, j, w in data:
        out.write(f"{data.nodes.label(i)}\t{data.nodes.label(j)}\t{w!r}\n")
    return out.getvalue()


def write_edge_list(data: EdgeDataset, path: str | Path, header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(format_edge_list(data))


SCALE_METHODS = ("minmax", "neg_exp_median", "none")


def scale_weights(raw: RawEdges | EdgeDataset, method: str) -> EdgeDataset:
    """Map raw edge measurements into [0, 1].

    ``minmax`` is affine from [min, max] onto [0, 1] (constant data maps to
    0.5). ``neg_exp_median`` treats values as latencies and returns
    ``exp(-latency / median)``.
    """
    w = np.asarray(raw.weight, dtype=float)
    if w.size == 0:
        raise DataError("cannot scale an empty dataset")
    if not np.all(np.isfinite(w)):
        raise DataError("non-finite weight")
    if method == "minmax":
        lo, hi = w.min(), w.max()
        scaled = np.full_like(w, 0.5) if hi == lo else (w - lo) / (hi - lo)
    elif method == "neg_exp_median":
        if np.any(w < 0):
            raise DataError("latencies must be nonnegative")
        med = float(np.median(w))
        if med <= 0:
            raise DataError("median latency must be positive")
        with np.errstate(over="ignore"):
            scaled = np.exp(-w / med)
    elif method == "none":
        scaled = w
    else:
        raise ValueError(f"unknown scaling method {method!r}")
    scaled = np.clip(scaled, 0.0, 1.0) if method != "none" else scaled
    multiset = getattr(raw, "multiset", False)
    return EdgeDataset(raw.nodes, raw.src, raw.dst, scaled, raw.symmetric,
                       raw.allow_self_loops, multiset)


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    fractions: tuple[float, float, float]
    train: list[int] = field(default_factory=list)
    cv: list[int] = field(default_factory=list)
    test: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "fractions": list(self.fractions),
                           "train": self.train, "cv": self.cv, "test": self.test})

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        d = json.loads(text)
        return cls(int(d["seed"]), tuple(d["fractions"]), d["train"], d["cv"], d["test"])

    def apply(self, data: EdgeDataset) -> tuple[EdgeDataset, EdgeDataset, EdgeDataset]:
        return data.subset(self.train), data.subset(self.cv), data.subset(self.test)


def split_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    """Floor the train and cv shares; the remainder goes to test."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise DataError("fractions must be three nonnegative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {sum(fractions)!r}")
    n_train = math.floor(fractions[0] * n + 1e-9)
    n_cv = math.floor(fractions[1] * n + 1e-9)
    n_test = n - n_train - n_cv
    for name, f, size in zip(("train", "cv", "test"), fractions, (n_train, n_cv, n_test)):
        if f > 0 and size == 0:
            raise DataError(f"{name} share {f} receives no edges out of {n}")
    return n_train, n_cv, n_test


def split_manifest(data: EdgeDataset, fractions: Sequence[float], seed: int) -> SplitManifest:
    n_train, n_cv, _ = split_sizes(data.num_edges, fractions)
    perm = np.random.default_rng(seed).permutation(data.num_edges)
    return SplitManifest(seed, tuple(float(f) for f in fractions),
                         sorted(perm[:n_train].tolist()),
                         sorted(perm[n_train:n_train + n_cv].tolist()),
                         sorted(perm[n_train + n_cv:].tolist()))


def split(data: EdgeDataset, fractions: Sequence[float], seed: int):
    """Partition edges uniformly at random into (train, cv, test) datasets."""
    return split_manifest(data, fractions, seed).apply(data)
