"""Augmented POI graph, transition matrix and endpoint-constrained random walks.

The behavioral graph counts successive-visit transitions; augmentation adds
both directed edges between every pair of POIs within a distance threshold
(default 3 km). Walks are sampled from the row-normalized transition matrix
and accepted only if they reach the designated destination within a length
budget, rejecting one-hop arrivals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .corpus import Poi, PoiTable, Trip
from .errors import DataError, IntegrityError

EARTH_RADIUS_KM = 6371.0


def haversine_km(a: Poi, b: Poi) -> float:
    """Great-circle distance in kilometers."""
    lon1, lat1, lon2, lat2 = map(math.radians, (a.lon, a.lat, b.lon, b.lat))
    h = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


class PoiGraph:
    """Directed multigraph summary: edge (src, dst) -> transition frequency."""

    def __init__(self) -> None:
        self.nodes: set[str] = set()
        self.edges: dict[tuple[str, str], int] = {}

    def add_edge(self, src: str, dst: str, freq: int = 1) -> None:
        if src == dst:
            raise IntegrityError(f"self-loop {src!r} not allowed")
        if freq < 1:
            raise IntegrityError(f"edge frequency must be >= 1, got {freq}")
        self.nodes.add(src)
        self.nodes.add(dst)
        self.edges[(src, dst)] = self.edges.get((src, dst), 0) + freq

    def out_edges(self, src: str) -> list[tuple[str, int]]:
        return [(d, f) for (s, d), f in self.edges.items() if s == src]

    def copy(self) -> "PoiGraph":
        g = PoiGraph()
        g.nodes = set(self.nodes)
        g.edges = dict(self.edges)
        return g


@dataclass(frozen=True)
class Walk:
    pois: tuple[str, ...]


@dataclass(frozen=True)
class QueryCandidate:
    src: str
    dst: str

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise IntegrityError("query candidate src and dst must differ")


class TransitionMatrix:
    """Row-stochastic transition probabilities, sparse per-source rows.

    Rows exist only for nodes with at least one outgoing edge; each row's
    destinations are sorted so sampling is deterministic under a fixed seed.
    """

    def __init__(self, rows: dict[str, tuple[list[str], np.ndarray]]):
        self.rows = rows

    def prob(self, src: str, dst: str) -> float:
        if src not in self.rows:
            return 0.0
        dsts, probs = self.rows[src]
        try:
            return float(probs[dsts.index(dst)])
        except ValueError:
            return 0.0

    def row(self, src: str) -> tuple[list[str], np.ndarray]:
        """(sorted destination ids, matching probabilities) for one source."""
        return self.rows[src]

    def __contains__(self, src: str) -> bool:
        return src in self.rows


def build_base_graph(trips: list[Trip]) -> PoiGraph:
    """Count successive visiting transitions over all trips."""
    graph = PoiGraph()
    for trip in trips:
        ids = trip.poi_ids()
        graph.nodes.update(ids)
        for src, dst in zip(ids, ids[1:]):
            if src != dst:
                graph.add_edge(src, dst)
    return graph


def augment_graph(
    graph: PoiGraph, pois: PoiTable, threshold_km: float = 3.0
) -> PoiGraph:
    """Add both directed edges between graph nodes within ``threshold_km``.

    Behavioral frequencies are preserved exactly; geographic edges enter with
    frequency 1 only where no behavioral edge exists.
    """
    for node in graph.nodes:
        if node not in pois:
            raise IntegrityError(f"graph node {node!r} missing from POI table")
    out = graph.copy()
    nodes = sorted(graph.nodes)
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            if haversine_km(pois[a], pois[b]) <= threshold_km:
                out.edges.setdefault((a, b), 1)
                out.edges.setdefault((b, a), 1)
    return out


def transition_matrix(graph: PoiGraph) -> TransitionMatrix:
    """Normalize outgoing edge frequencies into per-source distributions."""
    if not graph.nodes:
        raise DataError("cannot build a transition matrix from an empty graph")
    by_src: dict[str, dict[str, int]] = {}
    for (src, dst), freq in graph.edges.items():
        by_src.setdefault(src, {})[dst] = freq
    rows: dict[str, tuple[list[str], np.ndarray]] = {}
    for src in sorted(by_src):
        dsts = sorted(by_src[src])
        freqs = np.array([by_src[src][d] for d in dsts], dtype=np.float64)
        rows[src] = (dsts, freqs / freqs.sum())
    return TransitionMatrix(rows)


def enumerate_query_candidates(graph: PoiGraph) -> list[QueryCandidate]:
    """All ordered pairs of distinct graph nodes, in sorted order."""
    nodes = sorted(graph.nodes)
    return [
        QueryCandidate(a, b) for a in nodes for b in nodes if a != b
    ]


def causal_random_walk(
    matrix: TransitionMatrix,
    src: str,
    dst: str,
    alpha: int,
    rng: np.random.Generator,
) -> Walk | None:
    """One attempt at sampling a walk from src that ends at dst.

    The walk takes at most ``alpha`` steps. Arriving at dst on the very first
    step rejects the walk, as does exhausting the budget or hitting a node
    with no outgoing edges. On success the interior never contains dst.
    """
    if src == dst:
        raise DataError("walk src and dst must differ")
    walk = [src]
    cur = src
    for step in range(1, alpha + 1):
        if cur not in matrix:
            return None  # dead end
        dsts, probs = matrix.rows[cur]
        cur = dsts[rng.choice(len(dsts), p=probs)]
        walk.append(cur)
        if cur == dst:
            if step == 1:
                return None
            return Walk(tuple(walk))
    return None


def generate_walk_corpus(
    matrix: TransitionMatrix,
    candidates: list[QueryCandidate],
    m_per_query: int = 5,
    alpha: int = 6,
    max_attempts_per_walk: int = 20,
    rng: np.random.Generator | None = None,
) -> list[Walk]:
    """Sample up to ``m_per_query`` walks per candidate.

    Each candidate gets an independently derived RNG stream keyed by its
    index, so the corpus is reproducible and candidates could be processed
    concurrently. Failed attempts (rejections, dead ends) count against a
    per-candidate budget of m_per_query * max_attempts_per_walk.
    """
    if not candidates:
        raise DataError("no query candidates to walk from")
    if rng is None:
        rng = np.random.default_rng(0)
    streams = rng.spawn(len(candidates))
    walks: list[Walk] = []
    for cand, stream in zip(candidates, streams):
        if cand.src not in matrix:
            continue
        successes = 0
        attempts = 0
        budget = m_per_query * max_attempts_per_walk
        while successes < m_per_query and attempts < budget:
            attempts += 1
            walk = causal_random_walk(matrix, cand.src, cand.dst, alpha, stream)
            if walk is not None:
                walks.append(walk)
                successes += 1
    return walks


def save_walks(walks: list[Walk], path: str) -> None:
    """One walk per line, space-separated POI ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for walk in walks:
            fh.write(" ".join(walk.pois))
            fh.write("\n")


def load_walks(path: str) -> list[Walk]:
    walks = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            ids = line.split()
            if ids:
                walks.append(Walk(tuple(ids)))
    return walks


def save_graph(graph: PoiGraph, path: str) -> None:
    """Edge-list CSV dump: src,dst,freq."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "freq"])
        for (src, dst) in sorted(graph.edges):
            writer.writerow([src, dst, graph.edges[(src, dst)]])


def load_graph(path: str) -> PoiGraph:
    graph = PoiGraph()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["src", "dst", "freq"]:
            raise DataError(f"{path}: not a graph edge-list dump")
        for src, dst, freq in reader:
            graph.add_edge(src, dst, int(freq))
    return graph
