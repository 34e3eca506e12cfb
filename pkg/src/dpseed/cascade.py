"""Independent-cascade realization, reachability, influence evaluation, and sample generation.

A contagion trace ("influence sample") is the indicator vector of all nodes
that can reach a uniformly chosen target node once every edge has been kept
or dropped independently with its own probability. Because the graph is
undirected the trace equals the connected component of the target in the
realized graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapacityError, ParameterError, ParseError
from .graph import WeightedGraph

EXACT_EDGE_LIMIT = 20

# Dense vectorized sampling is used automatically below this size; it
# pre-realizes every edge per sample, which only pays off on small graphs.
_DENSE_MAX_N = 24
_DENSE_MAX_CELLS = 1 << 26


@dataclass
class RealizedGraph:
    """One realization of a weighted graph: only the retained (live) edges."""

    n: int
    live_edges: list[tuple[int, int]]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def adjacency(self) -> list[np.ndarray]:
        if "adj" not in self._cache:
            nbrs: list[list[int]] = [[] for _ in range(self.n)]
            for u, v in self.live_edges:
                nbrs[u].append(v)
                nbrs[v].append(u)
            self._cache["adj"] = [np.array(a, dtype=np.int64) for a in nbrs]
        return self._cache["adj"]


def _check_nodes(n: int, nodes, what: str = "node set") -> list[int]:
    out = []
    for v in nodes:
        v = int(v)
        if not (0 <= v < n):
            raise ParameterError(f"{what} contains node {v}, out of range for n={n}")
        out.append(v)
    return out


def realize(graph: WeightedGraph, rng: np.random.Generator) -> RealizedGraph:
    """Keep each edge independently with its own probability."""
    u, v, p = graph.edge_arrays()
    keep = rng.random(p.shape[0]) < p
    live = [(int(a), int(b)) for a, b in zip(u[keep], v[keep])]
    return RealizedGraph(n=graph.n, live_edges=live)


def reachable(g: RealizedGraph, seeds) -> set[int]:
    """All nodes connected to the seed set through live edges (seeds included)."""
    sources = _check_nodes(g.n, seeds)
    adj = g.adjacency()
    visited = np.zeros(g.n, dtype=bool)
    stack = list(dict.fromkeys(sources))
    for s in stack:
        visited[s] = True
    while stack:
        node = stack.pop()
        for w in adj[node]:
            if not visited[w]:
                visited[w] = True
                stack.append(int(w))
    return set(np.flatnonzero(visited).tolist())


def conditional_reachable(g: RealizedGraph, seeds, blocked) -> set[int]:
    """Nodes reachable from ``seeds`` but not from ``blocked``."""
    return reachable(g, seeds) - reachable(g, blocked)


def _lazy_spread(
    graph: WeightedGraph,
    sources: list[int],
    rng: np.random.Generator,
    decided: np.ndarray,
    visited: np.ndarray,
) -> np.ndarray:
    """Connected closure of ``sources`` with edges realized on first contact.

    Each edge is decided at most once per call (memoized in ``decided``),
    which draws the same distribution as realizing the whole graph up front
    but touches only the frontier.
    """
    decided.fill(-1)
    visited.fill(False)
    adj = graph.adjacency()
    _, _, p = graph.edge_arrays()
    stack = list(dict.fromkeys(sources))
    for s in stack:
        visited[s] = True
    while stack:
        node = stack.pop()
        nbrs, eids = adj[node]
        if eids.shape[0] == 0:
            continue
        state = decided[eids]
        fresh = state == -1
        if fresh.any():
            fe = eids[fresh]
            outcome = (rng.random(fe.shape[0]) < p[fe]).astype(np.int8)
            decided[fe] = outcome
            state = decided[eids]
        for w in nbrs[state == 1]:
            if not visited[w]:
                visited[w] = True
                stack.append(int(w))
    return visited


def influence_mc(graph: WeightedGraph, seeds, trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo estimate of the expected spread size from ``seeds``."""
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    sources = _check_nodes(graph.n, seeds)
    if not sources:
        return 0.0
    decided = np.empty(graph.edge_count, dtype=np.int8)
    visited = np.empty(graph.n, dtype=bool)
    total = 0
    for _ in range(trials):
        total += int(_lazy_spread(graph, sources, rng, decided, visited).sum())
    return total / trials


class _DSU:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def influence_exact(graph: WeightedGraph, seeds) -> float:
    """Exact expected spread by enumerating every realization of the uncertain edges.

    Edges with probability 0 or 1 are resolved directly; only edges with
    0 < p < 1 are enumerated, and at most ``EXACT_EDGE_LIMIT`` of them are
    allowed after contracting the certain edges.
    """
    sources = _check_nodes(graph.n, seeds)
    if not sources:
        return 0.0

    certain = _DSU(graph.n)
    uncertain: list[tuple[int, int, float]] = []
    for u, v, p in graph.edges:
        if p >= 1.0:
            certain.union(u, v)
        elif p > 0.0:
            uncertain.append((u, v, p))

    roots = [certain.find(v) for v in range(graph.n)]
    labels = {r: i for i, r in enumerate(dict.fromkeys(roots))}
    weight = [0] * len(labels)
    for r in roots:
        weight[labels[r]] += 1
    seed_supers = sorted({labels[roots[s]] for s in sources})

    reduced = []
    for u, v, p in uncertain:
        a, b = labels[roots[u]], labels[roots[v]]
        if a != b:
            reduced.append((a, b, p))
    if len(reduced) > EXACT_EDGE_LIMIT:
        raise CapacityError(
            f"exact influence supports at most {EXACT_EDGE_LIMIT} uncertain edges, "
            f"got {len(reduced)}"
        )

    k = len(labels)
    terms = []
    for mask in range(1 << len(reduced)):
        dsu = _DSU(k)
        prob = 1.0
        for i, (a, b, p) in enumerate(reduced):
            if mask >> i & 1:
                prob *= p
                dsu.union(a, b)
            else:
                prob *= 1.0 - p
        seen_roots = set()
        size = 0
        for s in seed_supers:
            r = dsu.find(s)
            if r not in seen_roots:
                seen_roots.add(r)
        for comp in range(k):
            if dsu.find(comp) in seen_roots:
                size += weight[comp]
        terms.append(prob * size)
    return float(math.fsum(terms))


@dataclass
class InfluenceSampleMatrix:
    """Binary n x m matrix; column t is the active set of the t-th contagion trace.

    ``perturbed`` marks matrices that went through a noise channel (or were
    loaded from text with empty columns); only unperturbed draws guarantee
    every column contains its target node.
    """

    n: int
    m: int
    bits: np.ndarray
    perturbed: bool = False

    def __post_init__(self) -> None:
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.shape != (self.n, self.m):
            raise ParameterError(
                f"bits shape {self.bits.shape} does not match (n={self.n}, m={self.m})"
            )
        if self.bits.size and self.bits.max() > 1:
            raise ParameterError("sample matrix entries must be 0 or 1")

    def validate(self) -> None:
        """Check the structural invariants (raises ParameterError on violation)."""
        if not self.perturbed and self.m > 0 and not self.bits.any(axis=0).all():
            raise ParameterError("unperturbed sample matrix has an empty column")

    def active_set(self, t: int) -> list[int]:
        if not (0 <= t < self.m):
            raise ParameterError(f"sample index {t} out of range for m={self.m}")
        return np.flatnonzero(self.bits[:, t]).tolist()

    def flip_entry(self, v: int, t: int) -> "InfluenceSampleMatrix":
        """Copy with one entry flipped (the adjacency move for privacy checks)."""
        if not (0 <= v < self.n and 0 <= t < self.m):
            raise ParameterError(f"entry ({v},{t}) out of range")
        bits = self.bits.copy()
        bits[v, t] ^= 1
        return InfluenceSampleMatrix(n=self.n, m=self.m, bits=bits, perturbed=True)


def _draw_dense(graph: WeightedGraph, m: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized strict sampling: realize all edges per sample, closure by matrix steps."""
    n = graph.n
    eu, ev, p = graph.edge_arrays()
    bits = np.zeros((n, m), dtype=np.uint8)
    chunk = max(1, min(m, _DENSE_MAX_CELLS // max(1, n * n)))
    done = 0
    while done < m:
        c = min(chunk, m - done)
        targets = rng.integers(0, n, size=c)
        reach = np.zeros((c, n), dtype=bool)
        reach[np.arange(c), targets] = True
        if eu.shape[0]:
            live = rng.random((c, eu.shape[0])) < p[None, :]
            adj = np.zeros((c, n, n), dtype=bool)
            si, ei = np.nonzero(live)
            adj[si, eu[ei], ev[ei]] = True
            adj[si, ev[ei], eu[ei]] = True
            while True:
                grown = (adj & reach[:, None, :]).any(axis=2) | reach
                if (grown == reach).all():
                    break
                reach = grown
        bits[:, done : done + c] = reach.T.astype(np.uint8)
        done += c
    return bits


def draw_influence_samples(
    graph: WeightedGraph,
    m: int,
    rng: np.random.Generator,
    method: str = "auto",
) -> InfluenceSampleMatrix:
    """Draw m independent contagion traces, each from a fresh target and realization.

    ``method``: "lazy" realizes edges only along the frontier, "strict"
    realizes the whole graph before traversing, "auto" picks the dense strict
    path on small graphs and the lazy path otherwise. All three sample the
    same distribution.
    """
    if graph.n < 1:
        raise ParameterError("cannot sample from an empty graph")
    if m < 0:
        raise ParameterError(f"sample count must be >= 0, got {m}")
    if method not in ("auto", "lazy", "strict"):
        raise ParameterError(f"unknown sampling method {method!r}")

    n = graph.n
    if m == 0:
        return InfluenceSampleMatrix(n=n, m=0, bits=np.zeros((n, 0), dtype=np.uint8))

    dense_ok = n <= _DENSE_MAX_N and m * n * n <= _DENSE_MAX_CELLS
    if method == "auto":
        method = "strict" if dense_ok else "lazy"

    if method == "strict":
        if dense_ok:
            bits = _draw_dense(graph, m, rng)
        else:
            bits = np.zeros((n, m), dtype=np.uint8)
            for t in range(m):
                u = int(rng.integers(0, n))
                g = realize(graph, rng)
                for w in reachable(g, [u]):
                    bits[w, t] = 1
    else:
        bits = np.zeros((n, m), dtype=np.uint8)
        decided = np.empty(graph.edge_count, dtype=np.int8)
        visited = np.empty(n, dtype=bool)
        targets = rng.integers(0, n, size=m)
        for t in range(m):
            comp = _lazy_spread(graph, [int(targets[t])], rng, decided, visited)
            bits[:, t] = comp
    return InfluenceSampleMatrix(n=n, m=m, bits=bits)


def samples_to_text(x: InfluenceSampleMatrix) -> str:
    """Serialize: header line "# n=<n> m=<m>", then one sorted active set per line."""
    lines = [f"# n={x.n} m={x.m}"]
    for t in range(x.m):
        lines.append(" ".join(str(v) for v in x.active_set(t)))
    return "\n".join(lines) + "\n"


def samples_from_text(text: str, source: str = "<text>") -> InfluenceSampleMatrix:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError(f"{source}:1: missing '# n=<n> m=<m>' header")
    header = lines[0][1:].replace("=", " ").split()
    try:
        fields = dict(zip(header[0::2], (int(tok) for tok in header[1::2])))
        n, m = fields["n"], fields["m"]
    except (KeyError, ValueError, IndexError):
        raise ParseError(f"{source}:1: malformed header {lines[0]!r}") from None
    body = lines[1:]
    if len(body) < m:
        raise ParseError(f"{source}: expected {m} sample lines, found {len(body)}")
    bits = np.zeros((n, m), dtype=np.uint8)
    for t in range(m):
        line = body[t].strip()
        if not line:
            continue
        for tok in line.split():
            try:
                v = int(tok)
            except ValueError:
                raise ParseError(f"{source}:{t + 2}: non-integer node id {tok!r}") from None
            if not (0 <= v < n):
                raise ParseError(f"{source}:{t + 2}: node id {v} out of range for n={n}")
            bits[v, t] = 1
    empty = m > 0 and not bits.any(axis=0).all()
    return InfluenceSampleMatrix(n=n, m=m, bits=bits, perturbed=bool(empty))


def save_samples(x: InfluenceSampleMatrix, path: str | Path) -> None:
    Path(path).write_text(samples_to_text(x), encoding="utf-8")


def load_samples(path: str | Path) -> InfluenceSampleMatrix:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read samples file {path}: {exc}") from exc
    return samples_from_text(text, source=str(path))
