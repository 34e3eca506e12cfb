"""Privacy primitives and an exact small-instance verifier.

Two building blocks: independent bit flipping of the sample matrix (local
noise) and softmax selection over scored candidates (output noise). The
verifier enumerates every single-entry neighbor of a sample matrix and the
exact output distribution of a sequential mechanism over ordered seed
sequences, then bounds the worst log probability ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cascade import InfluenceSampleMatrix
from .errors import CapabilityError, CapacityError, ParameterError

VERIFY_MAX_N = 6
VERIFY_MAX_K = 3
VERIFY_MAX_ENTRIES = 24
RATIO_SLACK = 1e-9


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ParameterError(f"privacy budget must be finite and positive, got {self.epsilon}")


def rho_from_epsilon(epsilon: float) -> float:
    """Flip probability 1/(e^eps + 1), strictly below 1/2 for positive budgets.

    Evaluated in log space so very large budgets underflow cleanly to 0
    instead of overflowing.
    """
    if not math.isfinite(epsilon) or epsilon <= 0:
        raise ParameterError(f"epsilon must be finite and positive, got {epsilon}")
    return float(np.exp(-np.logaddexp(0.0, epsilon)))


def randomized_response(
    x: InfluenceSampleMatrix, rho: float, rng: np.random.Generator
) -> InfluenceSampleMatrix:
    """Flip every entry independently with probability rho."""
    if not (0.0 <= rho < 0.5):
        raise ParameterError(f"flip probability must lie in [0, 1/2), got {rho}")
    flips = (rng.random(x.bits.shape) < rho).astype(np.uint8)
    return InfluenceSampleMatrix(n=x.n, m=x.m, bits=x.bits ^ flips, perturbed=True)


def exponential_weights(scores, epsilon: float, sensitivity: float) -> np.ndarray:
    """Softmax weights exp(eps * score / (2 * sensitivity)), max-subtracted for stability."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ParameterError("cannot select from an empty score vector")
    if sensitivity <= 0:
        raise ParameterError(f"sensitivity must be positive, got {sensitivity}")
    z = epsilon * scores / (2.0 * sensitivity)
    z -= z.max()
    w = np.exp(z)
    return w / w.sum()


def exponential_select(
    scores, epsilon: float, sensitivity: float, rng: np.random.Generator
) -> int:
    """Draw an index with probability proportional to exp(eps * score / (2 * sensitivity))."""
    probs = exponential_weights(scores, epsilon, sensitivity)
    return int(rng.choice(probs.shape[0], p=probs))


@dataclass
class MechanismDistribution:
    """Exact output distribution of a sequential mechanism over ordered seed tuples."""

    support: list[tuple[int, ...]]
    probs: np.ndarray

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {seq: float(p) for seq, p in zip(self.support, self.probs)}


def mechanism_distribution_exact(
    mechanism, x: InfluenceSampleMatrix, k: int
) -> MechanismDistribution:
    """Chain the per-step selection probabilities along every branch.

    The mechanism must expose closed-form per-step probabilities
    (``closed_form_steps`` plus ``step_probabilities(x, prefix)``); purely
    data-perturbing mechanisms cannot and are rejected.
    """
    if not getattr(mechanism, "closed_form_steps", False):
        raise CapabilityError(
            f"mechanism {getattr(mechanism, 'mechanism', mechanism)!r} does not expose "
            "closed-form per-step probabilities"
        )
    if x.n > VERIFY_MAX_N or k > VERIFY_MAX_K:
        raise CapacityError(
            f"exact distribution supports n <= {VERIFY_MAX_N} and k <= {VERIFY_MAX_K}, "
            f"got n={x.n}, k={k}"
        )
    if not (1 <= k <= x.n):
        raise ParameterError(f"k must lie in [1, n], got k={k}, n={x.n}")

    support: list[tuple[int, ...]] = []
    probs: list[float] = []

    def descend(prefix: tuple[int, ...], acc: float) -> None:
        if len(prefix) == k:
            support.append(prefix)
            probs.append(acc)
            return
        candidates, step_probs = mechanism.step_probabilities(x, prefix)
        for node, p in zip(candidates, step_probs):
            if p > 0.0:
                descend(prefix + (int(node),), acc * float(p))

    descend((), 1.0)
    return MechanismDistribution(support=support, probs=np.array(probs, dtype=np.float64))


@dataclass
class VerificationReport:
    """Worst-case log ratio over all single-entry neighbors and all outputs."""

    epsilon: float
    max_log_ratio: float
    worst_entry: tuple[int, int] | None
    worst_output: tuple[int, ...] | None
    passed: bool

    def to_json_dict(self) -> dict:
        worst = None
        if self.worst_entry is not None:
            worst = {
                "entry_flipped": list(self.worst_entry),
                "output": list(self.worst_output) if self.worst_output is not None else None,
            }
        return {
            "epsilon": self.epsilon,
            "max_log_ratio": self.max_log_ratio,
            "worst_pair": worst,
            "pass": self.passed,
        }


def verify_isdp_exact(
    mechanism, x: InfluenceSampleMatrix, k: int, epsilon: float
) -> VerificationReport:
    """Exhaustively check the eps bound on adjacent sample matrices.

    Both-zero probabilities are skipped (standard convention); a one-sided
    zero is an infinite ratio and fails outright.
    """
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if x.n * x.m > VERIFY_MAX_ENTRIES:
        raise CapacityError(
            f"exact verification supports n*m <= {VERIFY_MAX_ENTRIES}, got {x.n * x.m}"
        )
    base = mechanism_distribution_exact(mechanism, x, k).as_dict()

    max_ratio = 0.0
    worst_entry: tuple[int, int] | None = None
    worst_output: tuple[int, ...] | None = None
    for v in range(x.n):
        for t in range(x.m):
            neighbor = mechanism_distribution_exact(mechanism, x.flip_entry(v, t), k).as_dict()
            for seq in base.keys() | neighbor.keys():
                p = base.get(seq, 0.0)
                q = neighbor.get(seq, 0.0)
                if p == 0.0 and q == 0.0:
                    continue
                ratio = math.inf if (p == 0.0 or q == 0.0) else abs(math.log(p / q))
                if ratio > max_ratio:
                    max_ratio = ratio
                    worst_entry = (v, t)
                    worst_output = seq
    return VerificationReport(
        epsilon=float(epsilon),
        max_log_ratio=float(max_ratio),
        worst_entry=worst_entry,
        worst_output=worst_output,
        passed=bool(max_ratio <= epsilon + RATIO_SLACK),
    )
