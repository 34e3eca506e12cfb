"""Seed-selection mechanisms: sample greedy, softmax-noised greedy, bit-flip local noise, and baselines.

All mechanisms return a SeedSelection with a per-step log. Ties are broken by
lowest node id wherever a deterministic argmax is taken. An empty sample
collection (m=0) carries no information, so every data-driven mechanism
degrades to a uniform random choice of k distinct nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cascade import EXACT_EDGE_LIMIT, InfluenceSampleMatrix, influence_exact, influence_mc
from .errors import ParameterError
from .estimator import _debias_from_counts, _likelihood_cached
from .graph import WeightedGraph
from .privacy import exponential_select, exponential_weights, rho_from_epsilon, randomized_response

MECHANISMS = ("greedy", "exp_mech", "local_rr", "full_info", "uniform_random")


@dataclass
class SelectionStep:
    node: int
    score: float | None
    tag: str

    def to_json_dict(self) -> dict:
        return {"node": self.node, "score": self.score, "tag": self.tag}


@dataclass
class SeedSelection:
    mechanism: str
    seeds: list[int]
    per_step: list[SelectionStep]
    budget_spent: float = 0.0

    def __post_init__(self) -> None:
        if self.mechanism not in MECHANISMS:
            raise ParameterError(f"unknown mechanism {self.mechanism!r}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ParameterError("selected seeds must be distinct")
        if len(self.per_step) != len(self.seeds):
            raise ParameterError("per-step log length must match the number of seeds")

    def to_json_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "seeds": list(self.seeds),
            "per_step": [s.to_json_dict() for s in self.per_step],
            "budget_spent": self.budget_spent,
        }


def _validate_k(n: int, k: int, minimum: int = 1) -> None:
    if k < minimum:
        raise ParameterError(f"k must be >= {minimum}, got {k}")
    if k > n:
        raise ParameterError(f"k={k} exceeds the number of nodes n={n}")


def uniform_random_seed(n: int, k: int, rng: np.random.Generator) -> SeedSelection:
    """Uniform k-subset without replacement, reported in draw order."""
    _validate_k(n, k, minimum=0)
    seeds = [int(v) for v in rng.permutation(n)[:k]]
    steps = [SelectionStep(node=v, score=None, tag="uniform_random") for v in seeds]
    return SeedSelection(mechanism="uniform_random", seeds=seeds, per_step=steps)


def _degrade_uniform(n: int, k: int, rng: np.random.Generator | None) -> SeedSelection:
    if rng is None:
        rng = np.random.default_rng()
    return uniform_random_seed(n, k, rng)


def _marginal_counts(bits: np.ndarray, covered: np.ndarray) -> np.ndarray:
    """Per-node count of still-uncovered traces each node would hit."""
    if bits.shape[1] == 0:
        return np.zeros(bits.shape[0], dtype=np.int64)
    fresh = ~covered
    return bits[:, fresh].sum(axis=1).astype(np.int64)


def greedy_seed(
    x: InfluenceSampleMatrix, k: int, rng: np.random.Generator | None = None
) -> SeedSelection:
    """Iterative argmax of the marginal empirical influence; deterministic given x.

    ``rng`` is consumed only on the m=0 degradation path.
    """
    _validate_k(x.n, k)
    if x.m == 0:
        return _degrade_uniform(x.n, k, rng)
    bits = x.bits
    scale = x.n / x.m
    covered = np.zeros(x.m, dtype=bool)
    chosen: list[int] = []
    steps: list[SelectionStep] = []
    forbidden = np.zeros(x.n, dtype=bool)
    for _ in range(k):
        counts = _marginal_counts(bits, covered)
        counts[forbidden] = -1
        best = int(np.argmax(counts))
        chosen.append(best)
        forbidden[best] = True
        covered |= bits[best].astype(bool)
        steps.append(SelectionStep(node=best, score=scale * counts[best], tag="greedy"))
    return SeedSelection(mechanism="greedy", seeds=chosen, per_step=steps)


def exp_mech_seed(
    x: InfluenceSampleMatrix, k: int, epsilon: float, rng: np.random.Generator
) -> SeedSelection:
    """k sequential softmax selections over marginal influence scores.

    Each step spends eps/k on a selection with sensitivity n/m, i.e. weight
    exp((eps/k) * (m/2n) * marginal influence).
    """
    _validate_k(x.n, k)
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ParameterError(f"epsilon must be finite and positive, got {epsilon}")
    if x.m == 0:
        return _degrade_uniform(x.n, k, rng)
    bits = x.bits
    scale = x.n / x.m
    sensitivity = x.n / x.m
    step_budget = epsilon / k
    covered = np.zeros(x.m, dtype=bool)
    chosen: list[int] = []
    steps: list[SelectionStep] = []
    remaining = list(range(x.n))
    for _ in range(k):
        counts = _marginal_counts(bits, covered)
        scores = scale * counts[remaining]
        idx = exponential_select(scores, step_budget, sensitivity, rng)
        node = remaining.pop(idx)
        chosen.append(node)
        covered |= bits[node].astype(bool)
        steps.append(SelectionStep(node=node, score=float(scale * counts[node]), tag="exp_mech"))
    return SeedSelection(
        mechanism="exp_mech", seeds=chosen, per_step=steps, budget_spent=float(epsilon)
    )


def local_rr_seed(
    x: InfluenceSampleMatrix, k: int, epsilon: float, rng: np.random.Generator
) -> SeedSelection:
    """Perturb the samples once with bit flips, then greedily maximize the total debiased estimate.

    Selection reads only the perturbed matrix. The objective at each step is
    the full debiased estimate of S ∪ {v} (not a marginal), which is not
    additive across traces.
    """
    _validate_k(x.n, k)
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ParameterError(f"epsilon must be finite and positive, got {epsilon}")
    if x.m == 0:
        return _degrade_uniform(x.n, k, rng)
    rho = rho_from_epsilon(epsilon)
    noisy = randomized_response(x, rho, rng)
    bits = noisy.bits
    chosen: list[int] = []
    steps: list[SelectionStep] = []
    base = np.zeros(x.m, dtype=np.int64)
    for step in range(k):
        l = step + 1
        _likelihood_cached(rho, l)  # fail fast (and once) if the channel is degenerate
        best_node = -1
        best_value = -math.inf
        for v in range(x.n):
            if v in chosen:
                continue
            z = base + bits[v]
            counts = np.bincount(z, minlength=l + 1)
            value = _debias_from_counts(counts, rho, x.n)
            if value > best_value:
                best_value = value
                best_node = v
        chosen.append(best_node)
        base = base + bits[best_node]
        steps.append(SelectionStep(node=best_node, score=float(best_value), tag="local_rr"))
    return SeedSelection(
        mechanism="local_rr", seeds=chosen, per_step=steps, budget_spent=float(epsilon)
    )


def full_info_greedy(
    graph: WeightedGraph, k: int, trials_per_eval: int, rng: np.random.Generator
) -> SeedSelection:
    """Greedy on the true diffusion model: exact spread when enumerable, Monte Carlo otherwise."""
    _validate_k(graph.n, k)
    if trials_per_eval < 1:
        raise ParameterError(f"trials_per_eval must be >= 1, got {trials_per_eval}")
    uncertain = sum(1 for _, _, p in graph.edges if 0.0 < p < 1.0)
    use_exact = uncertain <= EXACT_EDGE_LIMIT

    chosen: list[int] = []
    steps: list[SelectionStep] = []
    for _ in range(k):
        best_node = -1
        best_value = -math.inf
        for v in range(graph.n):
            if v in chosen:
                continue
            candidate = chosen + [v]
            if use_exact:
                value = influence_exact(graph, candidate)
            else:
                value = influence_mc(graph, candidate, trials_per_eval, rng)
            if value > best_value:
                best_value = value
                best_node = v
        chosen.append(best_node)
        steps.append(SelectionStep(node=best_node, score=float(best_value), tag="full_info"))
    return SeedSelection(mechanism="full_info", seeds=chosen, per_step=steps)


class ExpMechSeeder:
    """Sequential softmax seeder handle exposing exact per-step probabilities."""

    mechanism = "exp_mech"
    closed_form_steps = True

    def __init__(self, epsilon: float, k: int):
        if epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {epsilon}")
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        self.epsilon = float(epsilon)
        self.k = int(k)

    def step_probabilities(self, x: InfluenceSampleMatrix, prefix: tuple[int, ...]):
        remaining = [v for v in range(x.n) if v not in prefix]
        if x.m == 0:
            probs = np.full(len(remaining), 1.0 / len(remaining))
            return remaining, probs
        covered = (
            x.bits[list(prefix)].any(axis=0) if prefix else np.zeros(x.m, dtype=bool)
        )
        counts = _marginal_counts(x.bits, covered)
        scores = (x.n / x.m) * counts[remaining]
        probs = exponential_weights(scores, self.epsilon / self.k, x.n / x.m)
        return remaining, probs

    def run(self, x: InfluenceSampleMatrix, rng: np.random.Generator) -> SeedSelection:
        return exp_mech_seed(x, self.k, self.epsilon, rng)


class GreedySeeder:
    """Deterministic greedy handle (point-mass per-step distributions)."""

    mechanism = "greedy"
    closed_form_steps = True

    def __init__(self, k: int):
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        self.k = int(k)

    def step_probabilities(self, x: InfluenceSampleMatrix, prefix: tuple[int, ...]):
        remaining = [v for v in range(x.n) if v not in prefix]
        if x.m == 0:
            return remaining, np.full(len(remaining), 1.0 / len(remaining))
        covered = (
            x.bits[list(prefix)].any(axis=0) if prefix else np.zeros(x.m, dtype=bool)
        )
        counts = _marginal_counts(x.bits, covered)
        sub = counts[remaining]
        probs = np.zeros(len(remaining))
        probs[int(np.argmax(sub))] = 1.0
        return remaining, probs

    def run(self, x: InfluenceSampleMatrix, rng: np.random.Generator) -> SeedSelection:
        return greedy_seed(x, self.k, rng)


class UniformSeeder:
    """Uniform random seeder handle (data-independent)."""

    mechanism = "uniform_random"
    closed_form_steps = True

    def __init__(self, k: int):
        if k < 0:
            raise ParameterError(f"k must be >= 0, got {k}")
        self.k = int(k)

    def step_probabilities(self, x: InfluenceSampleMatrix, prefix: tuple[int, ...]):
        remaining = [v for v in range(x.n) if v not in prefix]
        return remaining, np.full(len(remaining), 1.0 / len(remaining))

    def run(self, x: InfluenceSampleMatrix, rng: np.random.Generator) -> SeedSelection:
        return uniform_random_seed(x.n, self.k, rng)


class LocalRRSeeder:
    """Bit-flip local mechanism handle; per-step output probabilities have no closed form."""

    mechanism = "local_rr"
    closed_form_steps = False

    def __init__(self, epsilon: float, k: int):
        self.epsilon = float(epsilon)
        self.k = int(k)

    def run(self, x: InfluenceSampleMatrix, rng: np.random.Generator) -> SeedSelection:
        return local_rr_seed(x, self.k, self.epsilon, rng)
