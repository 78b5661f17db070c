"""Contrastive POI representation learning over the walk corpus.

Two tables are trained jointly: v (the POI embeddings kept for the rest of
the pipeline) and a query-side table v' used only to form walk anchors
q = (v'(l_1) + v'(l_N)) / 2. For each walk, one interior POI is the
positive and k-1 POIs drawn from different-query walks are negatives:

    loss = -[ cos(v(pos), q) - log sum_j exp(cos(v(neg_j), q)) ]

v' is discarded after pretraining.
"""

from __future__ import annotations

import csv
import json
import logging

import numpy as np

from . import diffnum as dn
from .errors import DataError, SamplingError, VocabularyError
from .geograph import Walk

log = logging.getLogger(__name__)

INIT_SCALE = 0.05
FORMAT_VERSION = 1


class PoiEmbeddings:
    """A |L| x d embedding table with a POI id <-> row index vocabulary."""

    def __init__(self, vocabulary, table: np.ndarray, name: str = "v"):
        vocabulary = tuple(vocabulary)
        if len(set(vocabulary)) != len(vocabulary):
            raise DataError("embedding vocabulary contains duplicate POI ids")
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != len(vocabulary):
            raise DataError(
                f"embedding table shape {table.shape} does not match"
                f" vocabulary size {len(vocabulary)}"
            )
        self.vocabulary = vocabulary
        self.index = {poi: i for i, poi in enumerate(vocabulary)}
        self.param = dn.Parameter(name, table)

    @property
    def dim(self) -> int:
        return self.param.data.shape[1]

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __contains__(self, poi_id: str) -> bool:
        return poi_id in self.index

    def vector(self, poi_id: str) -> np.ndarray:
        if poi_id not in self.index:
            raise VocabularyError(f"POI {poi_id!r} not in embedding vocabulary")
        return self.param.data[self.index[poi_id]]

    def set_trainable(self, trainable: bool) -> None:
        self.param.tensor.requires_grad = trainable

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["poi_id"] + [f"f{i}" for i in range(self.dim)])
            for poi in self.vocabulary:
                writer.writerow([poi] + [repr(float(x)) for x in self.vector(poi)])

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "d": self.dim,
            "vocabulary": list(self.vocabulary),
            "values": [float(x) for x in self.param.data.ravel()],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PoiEmbeddings":
        vocab = doc["vocabulary"]
        table = np.array(doc["values"], dtype=np.float64).reshape(len(vocab), doc["d"])
        return cls(vocab, table)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "PoiEmbeddings":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def anchor(query_side: PoiEmbeddings, walk: Walk) -> dn.Tensor:
    """Walk anchor: the average of the query-side endpoint rows."""
    for poi in (walk.pois[0], walk.pois[-1]):
        if poi not in query_side.index:
            raise VocabularyError(f"POI {poi!r} not in embedding vocabulary")
    first = dn.embedding_lookup(query_side.param.tensor, query_side.index[walk.pois[0]])
    last = dn.embedding_lookup(query_side.param.tensor, query_side.index[walk.pois[-1]])
    return dn.affine(dn.add(first, last), 0.5)


def sample_contrastive_batch(corpus, walk_index: int, rng: np.random.Generator,
                             k: int = 11, others=None):
    """Pick (positive POI, k-1 negative POIs) for one walk.

    The positive is uniform over interior POIs that are neither endpoint.
    Each negative comes from a uniformly chosen walk whose (src, dst) query
    differs, at a uniform position. ``others`` may carry the precomputed
    list of different-query walk indices.
    """
    walk = corpus[walk_index]
    if len(walk.pois) < 3:
        raise SamplingError(f"walk {walk_index} has no interior POI")
    src, dst = walk.pois[0], walk.pois[-1]
    eligible = [p for p in walk.pois[1:-1] if p != src and p != dst]
    if not eligible:
        raise SamplingError(f"walk {walk_index} has no interior POI distinct from its endpoints")
    positive = eligible[int(rng.integers(len(eligible)))]
    if others is None:
        others = [i for i, w in enumerate(corpus)
                  if (w.pois[0], w.pois[-1]) != (src, dst)]
    if not others:
        raise SamplingError("no walk with a different query to draw negatives from")
    negatives = []
    for _ in range(k - 1):
        other = corpus[others[int(rng.integers(len(others)))]]
        negatives.append(other.pois[int(rng.integers(len(other.pois)))])
    return positive, negatives


def poi_contrastive_loss(anchor_vec: dn.Tensor, pos_row: dn.Tensor,
                         neg_rows: dn.Tensor) -> dn.Tensor:
    """-[cos(pos, anchor) - logsumexp_j cos(neg_j, anchor)]."""
    s_pos = dn.cosine_similarity(pos_row, anchor_vec)
    s_negs = dn.cosine_similarity(neg_rows, anchor_vec)
    return dn.sub(dn.logsumexp(s_negs), s_pos)


def _others_by_query(walks) -> list[list[int]]:
    """For each walk, indices of walks with a different (src, dst) query."""
    queries = [(w.pois[0], w.pois[-1]) for w in walks]
    by_query: dict[tuple, list[int]] = {}
    for i, q in enumerate(queries):
        by_query.setdefault(q, []).append(i)
    all_indices = set(range(len(walks)))
    complement = {q: sorted(all_indices - set(idx)) for q, idx in by_query.items()}
    return [complement[q] for q in queries]


def train_poi_embeddings(walks, vocabulary, rng: np.random.Generator,
                         d: int = 250, k: int = 11, epochs: int = 50,
                         batch_size: int = 8, lr: float = 0.1) -> PoiEmbeddings:
    """Adam-train v and v' on the walk corpus; returns v only."""
    if not walks:
        raise SamplingError("walk corpus is empty")
    if len({(w.pois[0], w.pois[-1]) for w in walks}) < 2:
        raise SamplingError("walk corpus needs at least 2 distinct queries for negatives")
    vocab = tuple(vocabulary)
    known = set(vocab)
    for w in walks:
        for p in w.pois:
            if p not in known:
                raise VocabularyError(f"walk POI {p!r} missing from vocabulary")

    v = PoiEmbeddings(vocab, rng.uniform(-INIT_SCALE, INIT_SCALE, (len(vocab), d)), name="v")
    v_prime = PoiEmbeddings(vocab, rng.uniform(-INIT_SCALE, INIT_SCALE, (len(vocab), d)),
                            name="v_prime")
    v.set_trainable(True)
    v_prime.set_trainable(True)
    params = [v.param, v_prime.param]
    state = dn.AdamState(params, lr=lr)
    others = _others_by_query(walks)

    for epoch in range(epochs):
        order = rng.permutation(len(walks))
        epoch_loss = 0.0
        steps = 0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            with dn.Tape() as tape:
                total = None
                for wi in batch:
                    wi = int(wi)
                    walk = walks[wi]
                    pos, negs = sample_contrastive_batch(walks, wi, rng, k=k,
                                                         others=others[wi])
                    a = anchor(v_prime, walk)
                    pos_row = dn.embedding_lookup(v.param.tensor, v.index[pos])
                    neg_rows = dn.embedding_lookup(v.param.tensor,
                                                   [v.index[p] for p in negs])
                    loss = poi_contrastive_loss(a, pos_row, neg_rows)
                    total = loss if total is None else dn.add(total, loss)
                batch_loss = dn.affine(total, 1.0 / len(batch))
            dn.backward(tape, batch_loss)
            dn.adam_step(params, state)
            epoch_loss += batch_loss.item()
            steps += 1
        log.debug("poi pretraining epoch %d: mean batch loss %.6f",
                  epoch, epoch_loss / max(1, steps))
    return v
