"""Sample-based influence estimation and the bit-flip debiasing pipeline.

The empirical influence of a seed set is (n/m) times the number of traces the
set intersects. When traces have been through an independent bit-flip channel
with probability rho, the observed overlap count |S ∩ x̃| of an l-set follows
a mixture of binomials; the (l+1)x(l+1) column-stochastic matrix mapping true
overlap counts to observed ones is invertible for rho < 1/2, which yields an
unbiased (possibly negative) estimate of the influence after a linear solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cascade import InfluenceSampleMatrix
from .errors import (
    CapacityError,
    ConditioningError,
    ParameterError,
    SingularityError,
    UndefinedEstimatorError,
)

DEFAULT_L_MAX = 25
PIVOT_TOL = 1e-12

_LONG = np.longdouble


def _lu_factor(matrix: np.ndarray, context: str) -> tuple[np.ndarray, np.ndarray]:
    """LU with partial pivoting in extended precision; raises on a vanishing pivot."""
    a = np.array(matrix, dtype=_LONG, copy=True)
    size = a.shape[0]
    perm = np.arange(size)
    for k in range(size):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < PIVOT_TOL:
            raise ConditioningError(
                f"debias system is numerically singular ({context}): pivot {float(abs(a[p, k])):.3e}"
            )
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        a[k + 1 :, k] /= a[k, k]
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k, k + 1 :])
    return a, perm


def _lu_solve(lu: np.ndarray, perm: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    x = np.array(rhs, dtype=_LONG)[perm]
    size = lu.shape[0]
    for k in range(size):
        x[k + 1 :] -= lu[k + 1 :, k] * x[k]
    for k in range(size - 1, -1, -1):
        x[k] -= lu[k, k + 1 :] @ x[k + 1 :]
        x[k] /= lu[k, k]
    return x


@dataclass
class LikelihoodMatrix:
    """Column-stochastic observation channel for overlap counts of an l-set.

    Entry (a, b) is the probability of observing overlap a given true overlap
    b, i.e. Pr[Bin(b, 1-rho) + Bin(l-b, rho) = a]. Entries are kept in
    extended precision because the inverse blows up as rho approaches 1/2.
    The LU factorization is computed once and cached.
    """

    rho: float
    l: int
    entries: np.ndarray
    _lu: tuple | None = field(default=None, repr=False, compare=False)

    def _factorization(self) -> tuple[np.ndarray, np.ndarray]:
        if self._lu is None:
            self._lu = _lu_factor(self.entries, context=f"rho={self.rho}, l={self.l}")
        return self._lu

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        lu, perm = self._factorization()
        return _lu_solve(lu, perm, np.asarray(rhs))

    def inverse(self) -> np.ndarray:
        """Inverse in extended precision (diagnostics; solves are preferred)."""
        lu, perm = self._factorization()
        size = self.l + 1
        out = np.empty((size, size), dtype=_LONG)
        eye = np.eye(size, dtype=_LONG)
        for j in range(size):
            out[:, j] = _lu_solve(lu, perm, eye[:, j])
        return out

    def to_csv(self) -> str:
        rows = [",".join(repr(float(x)) for x in row) for row in self.entries]
        return "\n".join(rows) + "\n"


def build_likelihood(rho: float, l: int, l_max: int = DEFAULT_L_MAX) -> LikelihoodMatrix:
    """Construct the flip channel matrix for sets of size l at flip probability rho."""
    if not (0.0 <= rho):
        raise ParameterError(f"flip probability must be nonnegative, got {rho}")
    if rho >= 0.5:
        raise SingularityError(
            f"flip probability {rho} >= 1/2: the channel cannot be inverted"
        )
    if l < 1:
        raise ParameterError(f"set size must be >= 1, got {l}")
    if l > l_max:
        raise CapacityError(f"set size {l} exceeds the configured maximum {l_max}")

    r = _LONG(rho)
    q = _LONG(1) - r
    r_pow = r ** np.arange(2 * l + 1, dtype=np.int64)
    q_pow = q ** np.arange(2 * l + 1, dtype=np.int64)
    entries = np.zeros((l + 1, l + 1), dtype=_LONG)
    for b in range(l + 1):
        for a in range(l + 1):
            acc = _LONG(0)
            for j in range(max(0, b - a), min(l - a, b) + 1):
                flips = a - b + 2 * j
                acc += (
                    _LONG(math.comb(b, j) * math.comb(l - b, a - b + j))
                    * r_pow[flips]
                    * q_pow[l - flips]
                )
            entries[a, b] = acc
    return LikelihoodMatrix(rho=float(rho), l=l, entries=entries)


@lru_cache(maxsize=256)
def _likelihood_cached(rho: float, l: int) -> LikelihoodMatrix:
    return build_likelihood(rho, l)


@dataclass
class EmpiricalOverlap:
    """Histogram of observed overlap counts |S ∩ x̃| across m traces."""

    l: int
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.l + 1,):
            raise ParameterError(
                f"counts must have length l+1={self.l + 1}, got shape {self.counts.shape}"
            )
        if (self.counts < 0).any():
            raise ParameterError("overlap counts must be nonnegative")

    @property
    def m(self) -> int:
        return int(self.counts.sum())

    @property
    def freqs(self) -> np.ndarray:
        if self.m == 0:
            raise UndefinedEstimatorError("overlap frequencies are undefined for m=0")
        return self.counts.astype(np.float64) / self.m


def _node_list(x: InfluenceSampleMatrix, nodes, what: str = "seed set") -> list[int]:
    out = []
    for v in nodes:
        v = int(v)
        if not (0 <= v < x.n):
            raise ParameterError(f"{what} contains node {v}, out of range for n={x.n}")
        out.append(v)
    if len(set(out)) != len(out):
        raise ParameterError(f"{what} contains duplicate nodes")
    return out


def reachable_sample_indices(x: InfluenceSampleMatrix, seeds) -> set[int]:
    """Indices of the traces whose active set intersects ``seeds``."""
    nodes = _node_list(x, seeds)
    if not nodes or x.m == 0:
        return set()
    hit = x.bits[nodes].any(axis=0)
    return set(np.flatnonzero(hit).tolist())


def empirical_influence(x: InfluenceSampleMatrix, seeds) -> float:
    """(n/m) times the number of traces intersected by ``seeds``."""
    nodes = _node_list(x, seeds)
    if x.m == 0:
        raise UndefinedEstimatorError(
            "empirical influence is undefined with no samples (m=0)"
        )
    if not nodes:
        return 0.0
    hits = int(x.bits[nodes].any(axis=0).sum())
    return x.n / x.m * hits


def marginal_influence(x: InfluenceSampleMatrix, v: int, seeds) -> float:
    """Influence gain of adding ``v``: (n/m) times the traces hit by v but not by ``seeds``."""
    base = _node_list(x, seeds)
    v = int(v)
    if not (0 <= v < x.n):
        raise ParameterError(f"candidate node {v} out of range for n={x.n}")
    if v in base:
        raise ParameterError(f"candidate node {v} is already in the seed set")
    if x.m == 0:
        raise UndefinedEstimatorError(
            "marginal influence is undefined with no samples (m=0)"
        )
    row = x.bits[v].astype(bool)
    if base:
        covered = x.bits[base].any(axis=0)
        fresh = int((row & ~covered).sum())
    else:
        fresh = int(row.sum())
    return x.n / x.m * fresh


def empirical_overlap(x: InfluenceSampleMatrix, seeds) -> EmpiricalOverlap:
    """Histogram of |S ∩ x̃^t| over the m traces."""
    nodes = _node_list(x, seeds)
    if not nodes:
        raise ParameterError("overlap histogram needs a nonempty seed set")
    l = len(nodes)
    z = x.bits[nodes].sum(axis=0).astype(np.int64)
    counts = np.bincount(z, minlength=l + 1)
    return EmpiricalOverlap(l=l, counts=counts)


def solve_debias(C: LikelihoodMatrix, observed) -> np.ndarray:
    """Recover the true overlap distribution estimate f from observed frequencies.

    The result sums to 1 up to solver tolerance but its entries may leave
    [0, 1]: it is an unbiased estimate, not a distribution.
    """
    if isinstance(observed, EmpiricalOverlap):
        if observed.l != C.l:
            raise ParameterError(
                f"overlap size {observed.l} does not match channel size {C.l}"
            )
        rhs = observed.freqs
    else:
        rhs = np.asarray(observed, dtype=np.float64)
        if rhs.shape != (C.l + 1,):
            raise ParameterError(
                f"frequency vector must have length l+1={C.l + 1}, got shape {rhs.shape}"
            )
    return C.solve(rhs).astype(np.float64)


def _debias_from_counts(counts: np.ndarray, rho: float, n: int) -> float:
    """Shared core of the debiased estimate: n * (1 - f_0) from overlap counts."""
    l = counts.shape[0] - 1
    m = int(counts.sum())
    if m == 0:
        raise UndefinedEstimatorError("debiased influence is undefined with no samples (m=0)")
    C = _likelihood_cached(float(rho), l)
    f = C.solve(counts.astype(np.float64) / m)
    return float(n * (_LONG(1) - f[0]))


def debiased_influence(x_tilde: InfluenceSampleMatrix, seeds, rho: float) -> float:
    """Unbiased influence estimate from perturbed traces; may fall outside [0, n]."""
    overlap = empirical_overlap(x_tilde, seeds)
    if rho >= 0.5:
        raise SingularityError(
            f"flip probability {rho} >= 1/2: the channel cannot be inverted"
        )
    return _debias_from_counts(overlap.counts, rho, x_tilde.n)


def debiased_influence_clamped(x_tilde: InfluenceSampleMatrix, seeds, rho: float) -> float:
    """Debiased estimate clamped to [0, n]; clamping sacrifices unbiasedness."""
    return min(max(debiased_influence(x_tilde, seeds, rho), 0.0), float(x_tilde.n))
