"""Shared builders and fixtures for the test suite."""
import logging

import numpy as np
import pytest

from triprec.corpus import Corpus, Poi, PoiTable, Trip, Visit

logging.getLogger("triprec").setLevel(logging.WARNING)


def make_pois(n: int, prefix: str = "p", lon0: float = 135.50, lat0: float = 34.70,
              step_deg: float = 0.01) -> PoiTable:
    """n POIs on a small grid, ids ``{prefix}00 .. {prefix}{n-1:02d}``."""
    return PoiTable([
        Poi(f"{prefix}{i:02d}", lon0 + step_deg * (i % 5), lat0 + step_deg * (i // 5))
        for i in range(n)
    ])


def make_trip(trip_id: str, seq, user_id: str = "u0", t0: int = 1_600_000_000,
              start_hour: int = 9) -> Trip:
    """A trip visiting ``seq`` at one-hour spacing starting at ``start_hour``."""
    visits = tuple(
        Visit(poi, t0 + 3600 * j, (start_hour + j) % 24) for j, poi in enumerate(seq)
    )
    return Trip(trip_id, user_id, visits)


def small_corpus_trips():
    return (
        make_trip("t1", ["p00", "p01", "p02"]),
        make_trip("t2", ["p00", "p01", "p03"], user_id="u1"),
        make_trip("t3", ["p02", "p03", "p04"], user_id="u1"),
        make_trip("t4", ["p01", "p04", "p05"], user_id="u2"),
        make_trip("t5", ["p00", "p02", "p05"], user_id="u2"),
        make_trip("t6", ["p03", "p01", "p05"], user_id="u3"),
    )


@pytest.fixture()
def small_corpus() -> Corpus:
    return Corpus(make_pois(6), small_corpus_trips())


@pytest.fixture(scope="session")
def session_corpus() -> Corpus:
    return Corpus(make_pois(6), small_corpus_trips())


@pytest.fixture(scope="session")
def tiny_config():
    from triprec.selftrain import TrainConfig

    return TrainConfig(d=8, d_q=6, hidden=12, f_out=4, batch_size=3, lr=0.05,
                       k=3, alpha=6, m_per_query=2, epochs_poi=2, epochs_warmup=2,
                       epochs_supervised=40, seed=7)


@pytest.fixture(scope="session")
def tiny_model(session_corpus, tiny_config):
    """One small fully trained model, shared by read-only tests."""
    from triprec.selftrain import train

    return train(session_corpus, tiny_config, rng=np.random.default_rng(7))
