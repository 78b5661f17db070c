"""POI graph construction, transition matrices and causal random walks."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_pois, make_trip
from triprec.corpus import Poi, PoiTable
from triprec.errors import DataError, IntegrityError
from triprec.geograph import (PoiGraph, QueryCandidate, TransitionMatrix, Walk,
                              augment_graph, build_base_graph,
                              causal_random_walk, enumerate_query_candidates,
                              generate_walk_corpus, haversine_km, load_graph,
                              load_walks, save_graph, save_walks,
                              transition_matrix)


# ----------------------------------------------------------------- distances

def test_haversine_zero_and_symmetry():
    a = Poi("a", 135.50, 34.70)
    b = Poi("b", 135.60, 34.75)
    assert haversine_km(a, a) == 0.0
    assert abs(haversine_km(a, b) - haversine_km(b, a)) < 1e-12


def test_haversine_one_degree_longitude_at_equator():
    # One degree of longitude on the equator spans 2*pi*R/360 km.
    a = Poi("a", 0.0, 0.0)
    b = Poi("b", 1.0, 0.0)
    expected = 2.0 * np.pi * 6371.0088 / 360.0
    assert abs(haversine_km(a, b) - expected) < 0.05


# -------------------------------------------------------------------- graphs

def test_build_base_graph_counts_transitions():
    trips = [make_trip("t1", ["a", "b", "c"]), make_trip("t2", ["a", "b", "a"])]
    g = build_base_graph(trips)
    assert g.edges[("a", "b")] == 2
    assert g.edges[("b", "c")] == 1
    assert g.edges[("b", "a")] == 1
    assert g.nodes == {"a", "b", "c"}


def test_graph_rejects_self_loops_and_bad_freq():
    g = PoiGraph()
    with pytest.raises(IntegrityError):
        g.add_edge("a", "a")
    with pytest.raises(IntegrityError):
        g.add_edge("a", "b", freq=0)


def test_augment_graph_preserves_behavioral_frequencies():
    pois = make_pois(4, step_deg=0.01)  # well within 3 km of each other
    trips = [make_trip("t1", ["p00", "p01", "p02"]),
             make_trip("t2", ["p00", "p01", "p03"])]
    g = build_base_graph(trips)
    aug = augment_graph(g, pois, threshold_km=3.0)
    assert aug.edges[("p00", "p01")] == 2  # untouched behavioral count
    # geographic closure adds both directions at frequency 1
    assert aug.edges[("p02", "p03")] == 1
    assert aug.edges[("p03", "p02")] == 1
    # the original graph object is not mutated
    assert ("p02", "p03") not in g.edges


def test_augment_graph_respects_threshold():
    pois = PoiTable([Poi("near1", 135.50, 34.70), Poi("near2", 135.505, 34.70),
                     Poi("far", 137.00, 34.70)])
    g = PoiGraph()
    g.add_edge("near1", "far")
    g.nodes.add("near2")
    aug = augment_graph(g, pois, threshold_km=3.0)
    assert ("near1", "near2") in aug.edges
    assert ("near1", "far") in aug.edges  # behavioral edge stays
    assert ("far", "near1") not in aug.edges  # too distant for a geo edge


def test_augment_graph_requires_known_pois():
    g = PoiGraph()
    g.add_edge("p00", "ghost")
    with pytest.raises(IntegrityError, match="ghost"):
        augment_graph(g, make_pois(2), threshold_km=3.0)


# -------------------------------------------------------- transition matrices

def test_transition_matrix_rows_are_sorted_distributions():
    g = PoiGraph()
    g.add_edge("s", "z", freq=1)
    g.add_edge("s", "a", freq=3)
    m = transition_matrix(g)
    dsts, probs = m.row("s")
    assert dsts == ["a", "z"]
    np.testing.assert_allclose(probs, [0.75, 0.25])
    assert m.prob("s", "a") == 0.75
    assert m.prob("s", "missing") == 0.0
    assert m.prob("unknown", "a") == 0.0
    assert "s" in m and "z" not in m  # sinks have no row


def test_transition_matrix_empty_graph():
    with pytest.raises(DataError):
        transition_matrix(PoiGraph())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_transition_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    g = PoiGraph()
    n = int(rng.integers(3, 12))
    names = [f"n{i}" for i in range(n)]
    for _ in range(int(rng.integers(n, 4 * n))):
        a, b = rng.choice(n, size=2, replace=False)
        g.add_edge(names[a], names[b], freq=int(rng.integers(1, 9)))
    m = transition_matrix(g)
    for src in m.rows:
        _, probs = m.row(src)
        assert abs(probs.sum() - 1.0) < 1e-9


# --------------------------------------------------------------------- walks

def chain_matrix(*nodes):
    """Deterministic a->b->c->... matrix."""
    g = PoiGraph()
    for a, b in zip(nodes, nodes[1:]):
        g.add_edge(a, b)
    return transition_matrix(g)


def test_walk_rejects_equal_endpoints():
    m = chain_matrix("a", "b", "c")
    with pytest.raises(DataError):
        causal_random_walk(m, "a", "a", 6, np.random.default_rng(0))


def test_walk_rejects_one_hop_arrival():
    m = chain_matrix("a", "b")
    assert causal_random_walk(m, "a", "b", 6, np.random.default_rng(0)) is None


def test_walk_accepts_two_step_arrival():
    m = chain_matrix("a", "b", "c")
    walk = causal_random_walk(m, "a", "c", 6, np.random.default_rng(0))
    assert walk == Walk(("a", "b", "c"))


def test_walk_budget_exhaustion_returns_none():
    m = chain_matrix("a", "b", "c", "d", "e")
    assert causal_random_walk(m, "a", "e", 3, np.random.default_rng(0)) is None
    assert causal_random_walk(m, "a", "e", 4, np.random.default_rng(0)) is not None


def test_walk_dead_end_returns_none():
    m = chain_matrix("a", "b")  # b has no outgoing edges
    assert causal_random_walk(m, "a", "c", 6, np.random.default_rng(0)) is None


def test_walk_interior_never_contains_destination():
    g = PoiGraph()
    for a in "abcd":
        for b in "abcd":
            if a != b:
                g.add_edge(a, b)
    m = transition_matrix(g)
    rng = np.random.default_rng(3)
    for _ in range(200):
        walk = causal_random_walk(m, "a", "d", 6, rng)
        if walk is None:
            continue
        assert walk.pois[0] == "a" and walk.pois[-1] == "d"
        assert "d" not in walk.pois[1:-1]
        assert 3 <= len(walk.pois) <= 7  # arrival step in [2, alpha]


def test_generate_walk_corpus_is_deterministic_and_valid():
    g = PoiGraph()
    rng = np.random.default_rng(9)
    names = [f"w{i}" for i in range(8)]
    for _ in range(40):
        a, b = rng.choice(8, size=2, replace=False)
        g.add_edge(names[a], names[b])
    m = transition_matrix(g)
    cands = enumerate_query_candidates(g)
    walks1 = generate_walk_corpus(m, cands, m_per_query=2, alpha=6,
                                  rng=np.random.default_rng(4))
    walks2 = generate_walk_corpus(m, cands, m_per_query=2, alpha=6,
                                  rng=np.random.default_rng(4))
    assert walks1 == walks2
    assert walks1
    for w in walks1:
        assert 3 <= len(w.pois) <= 7
        assert w.pois[-1] not in w.pois[1:-1]
        for a, b in zip(w.pois, w.pois[1:]):
            assert (a, b) in g.edges


def test_generate_walk_corpus_requires_candidates():
    m = chain_matrix("a", "b")
    with pytest.raises(DataError):
        generate_walk_corpus(m, [])


def test_enumerate_query_candidates_ordered_pairs():
    g = PoiGraph()
    g.add_edge("b", "a")
    g.nodes.add("c")
    cands = enumerate_query_candidates(g)
    assert cands == [QueryCandidate(a, b)
                     for a in ("a", "b", "c") for b in ("a", "b", "c") if a != b]


def test_query_candidate_rejects_loop():
    with pytest.raises(IntegrityError):
        QueryCandidate("x", "x")


# ------------------------------------------------------------- serialization

def test_walks_round_trip(tmp_path):
    walks = [Walk(("a", "b", "c")), Walk(("d", "e", "f", "g"))]
    path = str(tmp_path / "walks.txt")
    save_walks(walks, path)
    assert load_walks(path) == walks


def test_graph_round_trip(tmp_path):
    g = PoiGraph()
    g.add_edge("a", "b", freq=3)
    g.add_edge("b", "c")
    path = str(tmp_path / "graph.csv")
    save_graph(g, path)
    loaded = load_graph(path)
    assert loaded.edges == g.edges


def test_load_graph_rejects_foreign_csv(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_graph(str(path))
