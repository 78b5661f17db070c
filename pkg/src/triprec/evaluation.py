"""Metrics, leave-one-out evaluation, and the first-order Markov baseline.

F1 compares the POI sets of the recommended and true trips; pairs-F1
compares their sets of ordered POI pairs (every pair (x, y) with x visited
before y, adjacent or not). Leave-one-out evaluation retrains via a
caller-supplied trainer for each held-out trip and reports unweighted mean
scores over the splits that can be scored.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Query, leave_one_out_splits, query_of
from .errors import DataError, InfeasibleError, VocabularyError
from .geograph import TransitionMatrix, build_base_graph, transition_matrix

log = logging.getLogger(__name__)


def f1_score(rec, truth) -> float:
    """Set-overlap F1 between two POI sequences."""
    if not rec or not truth:
        raise DataError("f1_score: both sequences must be non-empty")
    rec_set, truth_set = set(rec), set(truth)
    common = len(rec_set & truth_set)
    precision = common / len(rec_set)
    recall = common / len(truth_set)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ordered_pairs(seq) -> set:
    return {(seq[i], seq[j]) for i in range(len(seq)) for j in range(i + 1, len(seq))}


def pairs_f1(rec, truth) -> float:
    """F1 over ordered POI pairs, capturing visit order beyond adjacency."""
    if len(rec) < 2 or len(truth) < 2:
        raise DataError("pairs_f1: both sequences need length >= 2")
    rec_pairs, truth_pairs = _ordered_pairs(rec), _ordered_pairs(truth)
    common = len(rec_pairs & truth_pairs)
    precision = common / len(rec_pairs)
    recall = common / len(truth_pairs)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ----------------------------------------------------------- Markov baseline

def markov_train(trips) -> TransitionMatrix:
    """First-order transition matrix from training trips only (no
    geographic augmentation)."""
    return transition_matrix(build_base_graph(trips))


def markov_recommend(matrix: TransitionMatrix, query: Query, vocabulary) -> list[str]:
    """Greedy transition-probability decode under the same endpoint,
    no-repeat, destination-reservation contract as the trip model.

    Steps with no graph successor fall back to a uniform choice over
    eligible POIs, which the smallest-id rule makes deterministic.
    """
    vocab = sorted(vocabulary)
    known = set(vocab)
    for poi in (query.start_poi, query.end_poi):
        if poi not in known:
            raise VocabularyError(f"POI {poi!r} not in training vocabulary")
    if query.n > len(vocab):
        raise InfeasibleError(
            f"cannot build a {query.n}-POI trip without repeats from"
            f" a {len(vocab)}-POI vocabulary")
    trip = [query.start_poi]
    visited = {query.start_poi}
    current = query.start_poi
    for _ in range(query.n - 2):
        best = None
        if current in matrix:
            dsts, probs = matrix.row(current)
            for dst, prob in zip(dsts, probs):
                if dst in visited or dst == query.end_poi or dst not in known:
                    continue
                if best is None or prob > best[1]:
                    best = (dst, prob)  # rows are id-sorted: first max wins ties
        if best is None:
            eligible = [p for p in vocab if p not in visited and p != query.end_poi]
            best = (eligible[0], 0.0)
        trip.append(best[0])
        visited.add(best[0])
        current = best[0]
    trip.append(query.end_poi)
    return trip


def make_markov_trainer():
    """Trainer adapter for evaluate_loocv."""

    def trainer(train_corpus: Corpus, held_out):
        matrix = markov_train(train_corpus.trips)
        vocab = sorted({p for t in train_corpus.trips for p in t.poi_ids()})

        def rec_fn(query: Query) -> list[str]:
            return markov_recommend(matrix, query, vocab)

        return rec_fn

    return trainer


# -------------------------------------------------------------------- LOOCV

@dataclass
class EvalRecord:
    trip_id: str
    query: dict | None
    truth: list[str]
    recommendation: list[str] | None
    f1: float | None
    pairs_f1: float | None
    skipped_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "trip_id": self.trip_id,
            "query": self.query,
            "truth": list(self.truth),
            "recommendation": self.recommendation,
            "f1": self.f1,
            "pairs_f1": self.pairs_f1,
            "skipped_reason": self.skipped_reason,
        }


@dataclass
class EvalReport:
    records: list[EvalRecord]
    mean_f1: float
    mean_pairs_f1: float
    n_evaluated: int
    n_skipped: int

    def to_dict(self) -> dict:
        return {
            "mean_f1": self.mean_f1,
            "mean_pairs_f1": self.mean_pairs_f1,
            "n_evaluated": self.n_evaluated,
            "n_skipped": self.n_skipped,
            "records": [r.to_dict() for r in self.records],
        }


def _query_dict(q: Query) -> dict:
    return {"start_poi": q.start_poi, "start_hour": q.start_hour,
            "end_poi": q.end_poi, "end_hour": q.end_hour, "n": q.n}


def assemble_report(records) -> EvalReport:
    records = sorted(records, key=lambda r: r.trip_id)
    scored = [r for r in records if r.skipped_reason is None]
    mean_f1 = float(np.mean([r.f1 for r in scored])) if scored else 0.0
    mean_pf1 = float(np.mean([r.pairs_f1 for r in scored])) if scored else 0.0
    return EvalReport(records, mean_f1, mean_pf1, len(scored),
                      len(records) - len(scored))


def evaluate_loocv(corpus: Corpus, trainer, jobs: int = 1) -> EvalReport:
    """Leave-one-out evaluation.

    ``trainer(train_corpus, held_out_trip)`` returns a callable mapping a
    Query to a recommended POI id list. Splits whose query cannot be formed
    or whose endpoints are absent from the training trips are recorded as
    skipped. Records are ordered by trip id regardless of completion order.
    """
    splits = list(leave_one_out_splits(corpus))

    def run_split(split) -> EvalRecord:
        held = split.held_out
        truth = held.poi_ids()
        if split.skip_reason is not None:
            return EvalRecord(held.trip_id, None, truth, None, None, None,
                              skipped_reason=split.skip_reason)
        query = query_of(held)
        rec_fn = trainer(split.train, held)
        rec = rec_fn(query)
        return EvalRecord(held.trip_id, _query_dict(query), truth, list(rec),
                          f1_score(rec, truth), pairs_f1(rec, truth))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_split, splits))
    else:
        records = [run_split(s) for s in splits]
    return assemble_report(records)


def evaluate_grouped(corpus: Corpus, fold_trainer, folds: int,
                     seed: int = 0) -> EvalReport:
    """Grouped variant of leave-one-out: trips are partitioned into
    ``folds`` deterministic folds; one model per fold is trained on the
    complement and scores every trip in its fold. A speed/fidelity
    trade-off for expensive trainers — fold size 1 recovers exact
    leave-one-out.

    ``fold_trainer(train_corpus)`` returns the query -> trip callable.
    """
    if folds < 2:
        raise DataError("evaluate_grouped needs folds >= 2")
    trips = sorted(corpus.trips, key=lambda t: t.trip_id)
    if len(trips) < folds:
        raise DataError(f"cannot split {len(trips)} trips into {folds} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(trips))
    assignment = {trips[int(i)].trip_id: pos % folds for pos, i in enumerate(order)}

    train_poi_sets = {}
    for fold in range(folds):
        keep = [t for t in trips if assignment[t.trip_id] != fold]
        train_poi_sets[fold] = {p for t in keep for p in t.poi_ids()}

    records = []
    rec_fns = {}
    for trip in trips:
        fold = assignment[trip.trip_id]
        truth = trip.poi_ids()
        try:
            query = query_of(trip)
        except DataError as exc:
            records.append(EvalRecord(trip.trip_id, None, truth, None, None, None,
                                      skipped_reason=str(exc)))
            continue
        pool_pois = train_poi_sets[fold]
        if query.start_poi not in pool_pois or query.end_poi not in pool_pois:
            records.append(EvalRecord(
                trip.trip_id, None, truth, None, None, None,
                skipped_reason="query endpoint absent from training trips"))
            continue
        if fold not in rec_fns:
            keep = tuple(t for t in trips if assignment[t.trip_id] != fold)
            rec_fns[fold] = fold_trainer(Corpus(corpus.pois, keep))
        rec = rec_fns[fold](query)
        records.append(EvalRecord(trip.trip_id, _query_dict(query), truth, list(rec),
                                  f1_score(rec, truth), pairs_f1(rec, truth)))
    return assemble_report(records)
