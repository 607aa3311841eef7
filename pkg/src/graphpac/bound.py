"""PAC-Bayesian generalization bounds for graph clustering models."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

UPPER_BRACKET = 1.0 - 1e-15
BISECTION_MAX_ITER = 200
DELTA_CLAMP = (1e-9, 0.5)


def binary_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), in nats.

    Uses 0 ln 0 = 0. Returns ``inf`` when q is 0 or 1 and p differs from it.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if q == 0.0 or q == 1.0:
        return 0.0 if p == q else math.inf
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return max(out, 0.0)


def inv_kl_upper(p_hat: float, epsilon: float) -> float:
    """Largest z in [p_hat, 1] with binary_kl(p_hat, z) <= epsilon.

    Bisection on the bracket [p_hat, 1 - 1e-15], where kl(p_hat, .) is
    increasing. Returns 1 if even the top of the bracket is within budget.
    """
    if not math.isfinite(epsilon):
        raise ValueError("epsilon must be finite")
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"p_hat must lie in [0, 1], got {p_hat}")
    if epsilon <= 0.0 or p_hat >= UPPER_BRACKET:
        return p_hat
    lo, hi = p_hat, UPPER_BRACKET
    if binary_kl(p_hat, hi) <= epsilon:
        return 1.0
    # Keep halving past the 1e-12 width target until the bracket is one ulp
    # wide; near z = 1 the kl slope is steep enough that a 1e-12 step in z
    # would move kl by more than 1e-9.
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if binary_kl(p_hat, mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    # lo is always feasible
    return lo


def default_quantization(num_clusters: int, sample_size: int) -> float:
    """Quantization step 5 |C|^2 / N, clamped for numerical safety."""
    lo, hi = DELTA_CLAMP
    return min(max(5.0 * num_clusters ** 2 / sample_size, lo), hi)


@dataclass(frozen=True)
class BoundInputs:
    empirical_loss: float
    mutual_info: float
    num_nodes: int
    num_clusters: int
    sample_size: int
    delta: float = 0.05
    alphabet_size: int | None = None
    quantization: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.empirical_loss <= 1.0:
            raise ValueError("empirical loss must lie in [0, 1]")
        # small slack for floating point round-off in the MI estimate
        if self.mutual_info < 0.0 or self.mutual_info > math.log(self.num_clusters) + 1e-9:
            raise ValueError("mutual information must lie in [0, ln|C|]")
        if self.sample_size < 1:
            raise ValueError("sample size must be positive")
        if self.num_nodes < 2 or self.num_clusters < 1:
            raise ValueError("need |X| >= 2 and |C| >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.alphabet_size is not None and self.alphabet_size < 2:
            raise ValueError("weight alphabet needs at least 2 symbols")
        if self.quantization is not None and not 0.0 < self.quantization < 1.0:
            raise ValueError("quantization step must lie in (0, 1)")


@dataclass(frozen=True)
class BoundReport:
    inputs: BoundInputs
    complexity: float
    expected_loss_bound: float
    kind: str
    correction: float = 0.0

    def record(self) -> dict:
        out = {"kind": self.kind}
        out.update({k: v for k, v in asdict(self.inputs).items() if v is not None})
        out["complexity"] = self.complexity
        out["correction"] = self.correction
        out["bound"] = self.expected_loss_bound
        return out

    def format(self) -> str:
        """Flat ``key=value`` record, one per line."""
        return "\n".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in self.record().items()) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def finite_alphabet_complexity(inputs: BoundInputs) -> float:
    if inputs.alphabet_size is None:
        raise ValueError("finite-alphabet bound needs alphabet_size")
    n_x, k, n = inputs.num_nodes, inputs.num_clusters, inputs.sample_size
    return (n_x * inputs.mutual_info + k * math.log(n_x) + k * k * math.log(inputs.alphabet_size)
            + 0.5 * math.log(4 * n) - math.log(inputs.delta)) / n


def finite_alphabet_bound(inputs: BoundInputs) -> BoundReport:
    """Bound on the expected loss for weights from a finite alphabet of size |W|."""
    eps = finite_alphabet_complexity(inputs)
    return BoundReport(inputs, eps, inv_kl_upper(inputs.empirical_loss, eps), "finite_alphabet")


def quantized_complexity(inputs: BoundInputs) -> float:
    if inputs.quantization is None:
        raise ValueError("quantized bound needs a quantization step")
    n_x, k, n = inputs.num_nodes, inputs.num_clusters, inputs.sample_size
    return (n_x * inputs.mutual_info + k * math.log(n_x) - k * k * math.log(inputs.quantization)
            + 0.5 * math.log(4 * n / inputs.delta ** 2)) / n


def quantized_bound(inputs: BoundInputs) -> BoundReport:
    """Bound for continuous weights rounded to a grid of step Delta.

    Rounding moves every loss by at most Delta + Delta^2/4, so the
    correction enters both the empirical argument and the result.
    """
    d = inputs.quantization
    eps = quantized_complexity(inputs)
    corr = d + d * d / 4.0
    z = inv_kl_upper(min(1.0, inputs.empirical_loss + corr), eps)
    return BoundReport(inputs, eps, min(1.0, z + corr), "quantized", corr)


def evaluate_bound(inputs: BoundInputs) -> BoundReport:
    """Quantized bound if a step is given, else the finite-alphabet one."""
    if inputs.quantization is not None:
        return quantized_bound(inputs)
    return finite_alphabet_bound(inputs)
