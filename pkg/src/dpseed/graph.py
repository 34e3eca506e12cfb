"""Edge-weighted undirected graphs: representation, random generators, and edge-list ingestion.

Nodes are dense integers 0..n-1. Every edge carries its own transmission
probability, even when uniform across the graph.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, ParseError


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or not (0.0 <= value <= 1.0):
        raise ParameterError(f"{name} must be a probability in [0, 1], got {value!r}")
    return value


@dataclass
class WeightedGraph:
    """Undirected graph on nodes 0..n-1 with a per-edge transmission probability.

    Edges are stored once, normalized so u < v; duplicates and self-loops are
    rejected. Instances are treated as immutable after construction.
    """

    n: int
    edges: list[tuple[int, int, float]]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 0:
            raise ParameterError(f"node count must be a nonnegative integer, got {self.n!r}")
        normalized: list[tuple[int, int, float]] = []
        seen: set[tuple[int, int]] = set()
        for u, v, p in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ParameterError(f"edge ({u},{v}) out of range for n={self.n}")
            if u == v:
                raise ParameterError(f"self-loop at node {u} is not allowed")
            p = _check_probability(f"weight of edge ({u},{v})", p)
            a, b = (u, v) if u < v else (v, u)
            if (a, b) in seen:
                raise ParameterError(f"duplicate edge ({a},{b})")
            seen.add((a, b))
            normalized.append((a, b, p))
        self.edges = normalized

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edge endpoints and weights as parallel arrays (cached)."""
        if "arrays" not in self._cache:
            if self.edges:
                u = np.array([e[0] for e in self.edges], dtype=np.int64)
                v = np.array([e[1] for e in self.edges], dtype=np.int64)
                p = np.array([e[2] for e in self.edges], dtype=np.float64)
            else:
                u = np.empty(0, dtype=np.int64)
                v = np.empty(0, dtype=np.int64)
                p = np.empty(0, dtype=np.float64)
            self._cache["arrays"] = (u, v, p)
        return self._cache["arrays"]

    def adjacency(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-node (neighbor ids, incident edge ids), cached."""
        if "adj" not in self._cache:
            nbrs: list[list[int]] = [[] for _ in range(self.n)]
            eids: list[list[int]] = [[] for _ in range(self.n)]
            for e, (u, v, _) in enumerate(self.edges):
                nbrs[u].append(v)
                eids[u].append(e)
                nbrs[v].append(u)
                eids[v].append(e)
            self._cache["adj"] = [
                (np.array(nbrs[w], dtype=np.int64), np.array(eids[w], dtype=np.int64))
                for w in range(self.n)
            ]
        return self._cache["adj"]

    def to_json_dict(self) -> dict:
        return {"n": self.n, "edges": [[u, v, p] for u, v, p in self.edges]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "WeightedGraph":
        try:
            n = data["n"]
            edges = [(int(u), int(v), float(p)) for u, v, p in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed graph JSON: {exc}") from exc
        return cls(n=n, edges=edges)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WeightedGraph":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read graph file {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"graph file {path} is not valid JSON: {exc}") from exc
        return cls.from_json_dict(data)


def erdos_renyi(
    n: int,
    edge_prob: float,
    cascade_prob: float,
    rng: np.random.Generator,
) -> WeightedGraph:
    """G(n, p) graph where every included edge carries weight ``cascade_prob``."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    edge_prob = _check_probability("edge_prob", edge_prob)
    cascade_prob = _check_probability("cascade_prob", cascade_prob)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < edge_prob
    edges = [(int(u), int(v), cascade_prob) for u, v in zip(iu[keep], iv[keep])]
    return WeightedGraph(n=n, edges=edges)


def star_graph(n: int, center: int, spoke_prob: float) -> WeightedGraph:
    """Star on n nodes: every non-center node attached to ``center`` with weight ``spoke_prob``."""
    if n < 2:
        raise ParameterError(f"star graph needs n >= 2, got {n}")
    if not (0 <= center < n):
        raise ParameterError(f"center {center} out of range for n={n}")
    spoke_prob = _check_probability("spoke_prob", spoke_prob)
    edges = [(center, v, spoke_prob) for v in range(n) if v != center]
    return WeightedGraph(n=n, edges=edges)


def clique_union(n: int, l: int) -> WeightedGraph:
    """l disjoint cliques of size n/l, all edge weights 1, no cross-clique edges."""
    if l < 1:
        raise ParameterError(f"clique count must be >= 1, got {l}")
    if n < 1 or n % l != 0:
        raise ParameterError(f"clique count {l} must divide n={n}")
    size = n // l
    edges = []
    for c in range(l):
        members = range(c * size, (c + 1) * size)
        edges.extend((u, v, 1.0) for i, u in enumerate(members) for v in list(members)[i + 1 :])
    return WeightedGraph(n=n, edges=edges)


@dataclass
class EdgeListLoad:
    """Result of ingesting a whitespace-separated edge list file."""

    graph: WeightedGraph
    id_map: dict[int, int]
    raw_pair_count: int
    kept_edge_count: int


def load_edge_list(path: str | Path, cascade_prob: float) -> EdgeListLoad:
    """Read "u v" pairs, remap ids densely by first appearance, drop self-loops and duplicates.

    Directed inputs are symmetrized: (u,v) and (v,u) collapse to one
    undirected edge. Lines starting with '#' are comments; blank lines are
    skipped. Both the raw pair count and the deduplicated edge count are
    reported, since upstream datasets disagree on which one they quote.
    """
    cascade_prob = _check_probability("cascade_prob", cascade_prob)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read edge list {path}: {exc}") from exc
    return parse_edge_list(text, cascade_prob, source=str(path))


def parse_edge_list(text: str, cascade_prob: float, source: str = "<text>") -> EdgeListLoad:
    cascade_prob = _check_probability("cascade_prob", cascade_prob)
    id_map: dict[int, int] = {}
    pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    raw = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) != 2:
            raise ParseError(f"{source}:{lineno}: expected two integer tokens, got {line!r}")
        try:
            a, b = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise ParseError(f"{source}:{lineno}: non-integer node id in {line!r}") from None
        raw += 1
        for orig in (a, b):
            if orig not in id_map:
                id_map[orig] = len(id_map)
        u, v = id_map[a], id_map[b]
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        if key in seen:
            continue
        seen.add(key)
        pairs.append(key)
    graph = WeightedGraph(n=len(id_map), edges=[(u, v, cascade_prob) for u, v in pairs])
    return EdgeListLoad(graph=graph, id_map=id_map, raw_pair_count=raw, kept_edge_count=len(pairs))
