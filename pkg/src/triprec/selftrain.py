"""Trip model: contrastive warm-up, destination-aware supervised training,
and constrained greedy decoding.

Training runs three phases over one Model:

1. POI pretraining (embed.train_poi_embeddings) on the walk corpus.
2. Contrastive trip warm-up: two augmented views per trip, in-batch
   InfoNCE over final GRU states (query encoder, f-layer and GRU learn;
   the POI table stays frozen).
3. Supervised teacher forcing: at every step the model predicts both the
   next POI and the trip's destination; the two cross-entropies are
   equally weighted and averaged over steps.

Decoding is greedy with the endpoints forced: already-visited POIs and the
destination are masked at intermediate steps, and ties break toward the
smallest vocabulary index.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import augment
from . import diffnum as dn
from . import encoders, geograph
from .corpus import Corpus, Query, query_of
from .embed import PoiEmbeddings, train_poi_embeddings
from .errors import (ConfigError, DataError, InfeasibleError, LoopTripError,
                     ValidationError, VocabularyError)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    """Hyperparameters for the three-phase pipeline."""

    d: int = 250
    d_q: int = 256
    hidden: int = 256
    f_out: int = 64
    batch_size: int = 8
    lr: float = 0.1
    k: int = 11
    alpha: int = 6
    m_per_query: int = 5
    max_attempts_per_walk: int = 20
    threshold_km: float = 3.0
    epochs_poi: int = 50
    epochs_warmup: int = 30
    epochs_supervised: int = 300
    mask_ratio: float = 0.2
    cutoff_ratio: float = 0.2
    dropout_rate: float = 0.5
    allow_identical_views: bool = False
    use_bilinear: bool = True
    use_dest_signal: bool = True
    finetune_v: bool = False
    seed: int = 0

    def validate(self) -> None:
        problems = []
        for name in ("d", "d_q", "hidden", "f_out"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.batch_size < 2:
            problems.append("batch_size must be >= 2 (in-batch negatives)")
        if self.lr <= 0:
            problems.append("lr must be positive")
        if self.k < 2:
            problems.append("k must be >= 2 (at least one negative)")
        if self.alpha < 2:
            problems.append("alpha must be >= 2")
        if self.m_per_query < 1:
            problems.append("m_per_query must be >= 1")
        if self.max_attempts_per_walk < 1:
            problems.append("max_attempts_per_walk must be >= 1")
        if self.threshold_km < 0:
            problems.append("threshold_km must be non-negative")
        for name in ("epochs_poi", "epochs_warmup", "epochs_supervised"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0")
        for name in ("mask_ratio", "cutoff_ratio"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must be in [0, 1]")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append("dropout_rate must be in [0, 1)")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg


class Model:
    """POI table, query encoder, GRU, and the two output heads."""

    def __init__(self, emb: PoiEmbeddings, query_params: encoders.QueryEncoderParams,
                 gru_params: encoders.GruParams, w_out: dn.Parameter, b_out: dn.Parameter,
                 w_dest: dn.Parameter, b_dest: dn.Parameter, config: TrainConfig,
                 config_fingerprint: str = ""):
        if w_out.data.shape != (gru_params.hidden_size, len(emb)):
            raise DataError(f"output head shape {w_out.data.shape} inconsistent"
                            f" with hidden={gru_params.hidden_size}, |L|={len(emb)}")
        if w_dest.data.shape != w_out.data.shape:
            raise DataError("destination head shape differs from output head")
        self.emb = emb
        self.query_params = query_params
        self.gru_params = gru_params
        self.w_out = w_out
        self.b_out = b_out
        self.w_dest = w_dest
        self.b_dest = b_dest
        self.config = config
        self.config_fingerprint = config_fingerprint

    @property
    def vocabulary(self) -> tuple:
        return self.emb.vocabulary

    def encoder_parameters(self) -> list[dn.Parameter]:
        return self.query_params.parameters() + self.gru_params.parameters()

    def head_parameters(self) -> list[dn.Parameter]:
        return [self.w_out, self.b_out, self.w_dest, self.b_dest]

    def all_parameters(self) -> list[dn.Parameter]:
        return [self.emb.param] + self.encoder_parameters() + self.head_parameters()

    def encode_query(self, query: Query) -> dn.Tensor:
        return encoders.encode_query(query, self.emb, self.query_params,
                                     use_bilinear=self.config.use_bilinear)

    # ---------------------------------------------------------------- decode

    def recommend(self, query: Query) -> list[str]:
        """Greedy constrained decode: length n, endpoints forced, no repeats."""
        for poi in (query.start_poi, query.end_poi):
            if poi not in self.emb.index:
                raise VocabularyError(f"POI {poi!r} not in model vocabulary")
        size = len(self.emb)
        if query.n > size:
            raise InfeasibleError(
                f"cannot build a {query.n}-POI trip without repeats from"
                f" a {size}-POI vocabulary")
        if query.n == 2:
            return [query.start_poi, query.end_poi]

        q_vec = self.encode_query(query)
        fq = dn.matmul(q_vec, self.gru_params.w_f.tensor)
        table = self.emb.param.tensor
        dest_idx = self.emb.index[query.end_poi]
        visited = {self.emb.index[query.start_poi]}
        trip = [query.start_poi]
        h = dn.zeros(self.gru_params.hidden_size)
        x = dn.concat([dn.embedding_lookup(table, self.emb.index[query.start_poi]), fq])
        h = encoders.gru_step(x, h, self.gru_params)
        for _ in range(query.n - 2):
            logits = h.data @ self.w_out.data + self.b_out.data
            scores = logits.copy()
            scores[list(visited)] = -np.inf
            scores[dest_idx] = -np.inf
            nxt = int(np.argmax(scores))  # argmax takes the first (smallest) index on ties
            visited.add(nxt)
            trip.append(self.emb.vocabulary[nxt])
            x = dn.concat([dn.embedding_lookup(table, nxt), fq])
            h = encoders.gru_step(x, h, self.gru_params)
        trip.append(query.end_poi)
        return trip

    # ----------------------------------------------------------- persistence

    def to_dict(self) -> dict:
        params = {}
        for p in self.all_parameters():
            params[p.name] = {"shape": list(p.data.shape),
                              "values": [float(x) for x in p.data.ravel()]}
        return {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "config_fingerprint": self.config_fingerprint,
            "vocabulary": list(self.vocabulary),
            "parameters": params,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc: dict) -> "Model":
        if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise DataError(f"unsupported checkpoint format_version"
                            f" {doc.get('format_version')!r}")
        config = TrainConfig.from_dict(doc["config"])
        vocab = doc["vocabulary"]
        raw = doc["parameters"]

        def arr(name):
            entry = raw[name]
            return np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])

        emb = PoiEmbeddings(vocab, arr("v"))
        qp = encoders.QueryEncoderParams(
            k_q=dn.Parameter("query.k_q", arr("query.k_q")),
            w_q=dn.Parameter("query.w_q", arr("query.w_q")),
            b_q=dn.Parameter("query.b_q", arr("query.b_q")),
        )
        gp = encoders.GruParams(**{
            name: dn.Parameter(f"gru.{name}", arr(f"gru.{name}"))
            for name in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r",
                         "w_h", "u_h", "b_h", "w_f")
        })
        return cls(emb, qp, gp,
                   dn.Parameter("head.w_out", arr("head.w_out")),
                   dn.Parameter("head.b_out", arr("head.b_out")),
                   dn.Parameter("head.w_dest", arr("head.w_dest")),
                   dn.Parameter("head.b_dest", arr("head.b_dest")),
                   config, doc.get("config_fingerprint", ""))

    @classmethod
    def load(cls, path) -> "Model":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_model(emb: PoiEmbeddings, config: TrainConfig, rng: np.random.Generator,
                config_fingerprint: str = "") -> Model:
    scale = encoders.INIT_SCALE
    size = len(emb)
    qp = encoders.init_query_encoder(config.d, config.d_q, rng)
    gp = encoders.init_gru(config.d, config.d_q, config.hidden, config.f_out, rng)
    w_out = dn.Parameter("head.w_out", rng.uniform(-scale, scale, (config.hidden, size)))
    b_out = dn.Parameter("head.b_out", np.zeros(size))
    w_dest = dn.Parameter("head.w_dest", rng.uniform(-scale, scale, (config.hidden, size)))
    b_dest = dn.Parameter("head.b_dest", np.zeros(size))
    return Model(emb, qp, gp, w_out, b_out, w_dest, b_dest, config, config_fingerprint)


# -------------------------------------------------------------------- losses

def view_contrastive_loss(views, model: Model) -> dn.Tensor:
    """In-batch InfoNCE over final hidden states of two fixed views per trip.

    ``views`` is a list of (Query, view_p, view_q) triples, m >= 2, where the
    view matrices are already-augmented embedding rows. Both views of a trip
    are encoded under the trip's own query vector; entry (i, j) of the score
    matrix is the inner product of final states <view_p_i, view_q_j>, and the
    loss is the mean over rows of -log softmax at the diagonal. Raw inner
    products keep the scores unbounded, so optimization can drive the loss
    toward zero instead of stalling at the similarity ceiling a normalized
    score would impose. Deterministic given its inputs, which makes it
    directly checkable against finite differences.
    """
    if len(views) < 2:
        raise ValidationError("contrastive batch needs at least 2 trips")
    finals_p, finals_q = [], []
    for query, view_p, view_q in views:
        q_vec = model.encode_query(query)
        states_p = encoders.encode_embedded(dn.constant(view_p), q_vec, model.gru_params)
        states_q = encoders.encode_embedded(dn.constant(view_q), q_vec, model.gru_params)
        finals_p.append(states_p[-1])
        finals_q.append(states_q[-1])
    p_mat = dn.stack_rows(finals_p)
    q_mat = dn.stack_rows(finals_q)
    scores = dn.matmul(p_mat, dn.transpose(q_mat))
    log_probs = dn.log_softmax(scores)
    return dn.affine(dn.mean(dn.diag_part(log_probs)), -1.0)


def sample_trip_views(batch, model: Model, rng: np.random.Generator):
    """Draw the two augmented views for each (poi_ids, Query) pair.

    The POI table is read as plain data: the warm-up phase keeps it frozen,
    so augmented views never carry gradients back into the embeddings.
    """
    cfg = model.config
    views = []
    for poi_ids, query in batch:
        rows = model.emb.param.data[[model.emb.index[p] for p in poi_ids]]
        view_p, view_q = augment.two_views(
            rows, rng, mask_ratio=cfg.mask_ratio, cutoff_ratio=cfg.cutoff_ratio,
            dropout_rate=cfg.dropout_rate, allow_identical=cfg.allow_identical_views)
        views.append((query, view_p, view_q))
    return views


def trip_contrastive_loss(batch, model: Model, rng: np.random.Generator) -> dn.Tensor:
    """In-batch InfoNCE over two sampled augmented views of each trip.

    ``batch`` is a list of (poi_ids, Query) pairs, m >= 2.
    """
    if len(batch) < 2:
        raise ValidationError("contrastive batch needs at least 2 trips")
    return view_contrastive_loss(sample_trip_views(batch, model, rng), model)


def supervised_loss(poi_ids, query: Query, model: Model) -> dn.Tensor:
    """Teacher-forced next-POI + destination cross-entropy, averaged over
    the N-1 prediction steps."""
    if len(poi_ids) != query.n:
        raise ValidationError(
            f"trip length {len(poi_ids)} does not match query n={query.n}")
    missing = [p for p in poi_ids if p not in model.emb.index]
    if missing:
        raise VocabularyError(f"POIs not in model vocabulary: {missing}")
    q_vec = model.encode_query(query)
    states = encoders.encode_trip(poi_ids, q_vec, model.emb, model.gru_params)
    dest_idx = model.emb.index[query.end_poi]
    total = None
    for tau in range(1, len(poi_ids)):  # predicting position tau from h_{tau-1}
        h_prev = states[tau - 1]
        logits = dn.add(dn.matmul(h_prev, model.w_out.tensor), model.b_out.tensor)
        ce_next = dn.affine(dn.take(dn.log_softmax(logits),
                                    model.emb.index[poi_ids[tau]]), -1.0)
        step_loss = ce_next
        if model.config.use_dest_signal:
            dest_logits = dn.add(dn.matmul(h_prev, model.w_dest.tensor),
                                 model.b_dest.tensor)
            ce_dest = dn.affine(dn.take(dn.log_softmax(dest_logits), dest_idx), -1.0)
            step_loss = dn.add(ce_next, ce_dest)
        total = step_loss if total is None else dn.add(total, step_loss)
    return dn.affine(total, 1.0 / (len(poi_ids) - 1))


# ------------------------------------------------------------------ training

def _usable_trips(trips) -> list[tuple[list[str], Query]]:
    """Pair each trip with its query; loop trips cannot form queries and are
    left to the graph/walk phase only."""
    out = []
    for trip in trips:
        try:
            query = query_of(trip)
        except LoopTripError:
            continue
        out.append((trip.poi_ids(), query))
    return out


def _batches(count: int, batch_size: int, rng: np.random.Generator):
    """Full-coverage mini-batches; a trailing singleton is folded into the
    previous batch so every batch keeps in-batch negatives."""
    order = [int(i) for i in rng.permutation(count)]
    chunks = [order[i:i + batch_size] for i in range(0, count, batch_size)]
    if len(chunks) >= 2 and len(chunks[-1]) == 1:
        chunks[-2].extend(chunks.pop())
    return chunks


def contrastive_warmup(trips, model: Model, rng: np.random.Generator) -> Model:
    """Warm the query encoder, f-layer and GRU; the POI table stays frozen."""
    pairs = _usable_trips(trips)
    if len(pairs) < 2:
        raise DataError(f"contrastive warm-up needs >= 2 usable trips, got {len(pairs)}")
    cfg = model.config
    model.emb.set_trainable(False)
    params = model.encoder_parameters()
    state = dn.AdamState(params, lr=cfg.lr)
    batch_size = min(cfg.batch_size, len(pairs))
    for epoch in range(cfg.epochs_warmup):
        epoch_loss, steps = 0.0, 0
        for chunk in _batches(len(pairs), batch_size, rng):
            batch = [pairs[i] for i in chunk]
            with dn.Tape() as tape:
                loss = trip_contrastive_loss(batch, model, rng)
            dn.backward(tape, loss)
            dn.adam_step(params, state)
            epoch_loss += loss.item()
            steps += 1
        log.info("warm-up epoch %d: mean batch loss %.6f",
                 epoch, epoch_loss / max(1, steps))
    return model


def supervised_train(trips, model: Model, rng: np.random.Generator) -> Model:
    """Phase 3: minimize the joint next-POI/destination objective."""
    pairs = _usable_trips(trips)
    if not pairs:
        raise DataError("supervised phase needs at least 1 usable trip")
    cfg = model.config
    model.emb.set_trainable(cfg.finetune_v)
    params = model.encoder_parameters() + model.head_parameters()
    if cfg.finetune_v:
        params = [model.emb.param] + params
    state = dn.AdamState(params, lr=cfg.lr)
    for epoch in range(cfg.epochs_supervised):
        epoch_loss, steps = 0.0, 0
        order = [int(i) for i in rng.permutation(len(pairs))]
        for start in range(0, len(order), cfg.batch_size):
            chunk = order[start:start + cfg.batch_size]
            with dn.Tape() as tape:
                total = None
                for i in chunk:
                    poi_ids, query = pairs[i]
                    loss = supervised_loss(poi_ids, query, model)
                    total = loss if total is None else dn.add(total, loss)
                batch_loss = dn.affine(total, 1.0 / len(chunk))
            dn.backward(tape, batch_loss)
            dn.adam_step(params, state)
            epoch_loss += batch_loss.item()
            steps += 1
        log.info("supervised epoch %d: mean batch loss %.6f",
                 epoch, epoch_loss / max(1, steps))
    model.emb.set_trainable(False)
    return model


def build_walks(corpus: Corpus, config: TrainConfig, rng: np.random.Generator):
    """Graph construction and walk generation for phase 1."""
    graph = geograph.build_base_graph(corpus.trips)
    graph = geograph.augment_graph(graph, corpus.pois, config.threshold_km)
    matrix = geograph.transition_matrix(graph)
    candidates = geograph.enumerate_query_candidates(graph)
    return geograph.generate_walk_corpus(
        matrix, candidates, m_per_query=config.m_per_query, alpha=config.alpha,
        max_attempts_per_walk=config.max_attempts_per_walk, rng=rng)


def train(corpus: Corpus, config: TrainConfig, rng: np.random.Generator | None = None,
          walks=None, embeddings: PoiEmbeddings | None = None,
          config_fingerprint: str = "") -> Model:
    """Run the full three-phase pipeline on a training corpus."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    vocab = sorted({p for t in corpus.trips for p in t.poi_ids()})
    if not vocab:
        raise DataError("training corpus has no trips")

    if embeddings is not None:
        emb = embeddings
    elif config.epochs_poi > 0:
        if walks is None:
            walks = build_walks(corpus, config, rng)
        emb = train_poi_embeddings(walks, vocab, rng, d=config.d, k=config.k,
                                   epochs=config.epochs_poi,
                                   batch_size=config.batch_size, lr=config.lr)
        log.info("POI pretraining done over %d walks", len(walks))
    else:
        emb = PoiEmbeddings(vocab, rng.uniform(-encoders.INIT_SCALE,
                                               encoders.INIT_SCALE,
                                               (len(vocab), config.d)))
    if set(emb.vocabulary) != set(vocab):
        raise DataError("embedding vocabulary does not match the training corpus")

    model = build_model(emb, config, rng, config_fingerprint)
    if config.epochs_warmup > 0:
        contrastive_warmup(corpus.trips, model, rng)
    if config.epochs_supervised > 0:
        supervised_train(corpus.trips, model, rng)
    return model
