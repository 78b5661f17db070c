"""Query and trip encoders.

A query is encoded by a bilinear interaction between its start side
a = [v(l_s) || u(t_s)] and destination side b = [v(l_d) || u(t_d)]:

    q = LeakyReLU( bilinear(b, K_q, a) + [a || b] W_q + b_q )

with bilinear(b, K, a)_k = sum_ij b_i K[i,j,k] a_j. Trips are encoded by a
GRU whose input at every step is [v(l_tau) || f(q)], f a bias-free dense
layer, h_0 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffnum as dn
from .corpus import Query
from .errors import ShapeError, ValidationError, VocabularyError

TIME_DIM = 24
LEAKY_SLOPE = 0.01
INIT_SCALE = 0.05


def encode_time(hour: int) -> np.ndarray:
    """One-hot hour-of-day vector (length 24)."""
    if not isinstance(hour, (int, np.integer)) or not 0 <= hour <= 23:
        raise ValidationError(f"hour must be an integer in [0, 23], got {hour!r}")
    u = np.zeros(TIME_DIM)
    u[int(hour)] = 1.0
    return u


@dataclass
class QueryEncoderParams:
    k_q: dn.Parameter  # (d+24, d+24, d_q)
    w_q: dn.Parameter  # (2(d+24), d_q)
    b_q: dn.Parameter  # (d_q,)

    @property
    def out_dim(self) -> int:
        return self.b_q.data.shape[0]

    def parameters(self) -> list[dn.Parameter]:
        return [self.k_q, self.w_q, self.b_q]


@dataclass
class GruParams:
    """Gate weights plus the f-layer that injects the query at every step."""

    w_z: dn.Parameter
    u_z: dn.Parameter
    b_z: dn.Parameter
    w_r: dn.Parameter
    u_r: dn.Parameter
    b_r: dn.Parameter
    w_h: dn.Parameter
    u_h: dn.Parameter
    b_h: dn.Parameter
    w_f: dn.Parameter  # (d_q, f_out), no bias

    @property
    def hidden_size(self) -> int:
        return self.b_z.data.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_z.data.shape[0]

    def parameters(self) -> list[dn.Parameter]:
        return [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r,
                self.w_h, self.u_h, self.b_h, self.w_f]


def init_query_encoder(d: int, d_q: int, rng: np.random.Generator,
                       prefix: str = "query") -> QueryEncoderParams:
    da = d + TIME_DIM
    return QueryEncoderParams(
        k_q=dn.Parameter(f"{prefix}.k_q", rng.uniform(-INIT_SCALE, INIT_SCALE, (da, da, d_q))),
        w_q=dn.Parameter(f"{prefix}.w_q", rng.uniform(-INIT_SCALE, INIT_SCALE, (2 * da, d_q))),
        b_q=dn.Parameter(f"{prefix}.b_q", np.zeros(d_q)),
    )


def init_gru(d: int, d_q: int, hidden: int, f_out: int,
             rng: np.random.Generator, prefix: str = "gru") -> GruParams:
    def mat(name, shape):
        return dn.Parameter(f"{prefix}.{name}", rng.uniform(-INIT_SCALE, INIT_SCALE, shape))

    input_size = d + f_out
    return GruParams(
        w_z=mat("w_z", (input_size, hidden)),
        u_z=mat("u_z", (hidden, hidden)),
        b_z=dn.Parameter(f"{prefix}.b_z", np.zeros(hidden)),
        w_r=mat("w_r", (input_size, hidden)),
        u_r=mat("u_r", (hidden, hidden)),
        b_r=dn.Parameter(f"{prefix}.b_r", np.zeros(hidden)),
        w_h=mat("w_h", (input_size, hidden)),
        u_h=mat("u_h", (hidden, hidden)),
        b_h=dn.Parameter(f"{prefix}.b_h", np.zeros(hidden)),
        w_f=mat("w_f", (d_q, f_out)),
    )


def encode_query(query: Query, emb, params: QueryEncoderParams,
                 use_bilinear: bool = True) -> dn.Tensor:
    """Dense query vector. ``emb`` is a PoiEmbeddings (vocabulary + table).

    ``use_bilinear=False`` drops the tensor-interaction term, leaving the
    plain affine map over [a || b] (the concatenation-only ablation).
    """
    for poi in (query.start_poi, query.end_poi):
        if poi not in emb.index:
            raise VocabularyError(f"POI {poi!r} not in model vocabulary")
    a = dn.concat([
        dn.embedding_lookup(emb.param.tensor, emb.index[query.start_poi]),
        dn.constant(encode_time(query.start_hour)),
    ])
    b = dn.concat([
        dn.embedding_lookup(emb.param.tensor, emb.index[query.end_poi]),
        dn.constant(encode_time(query.end_hour)),
    ])
    lin = dn.add(dn.matmul(dn.concat([a, b]), params.w_q.tensor), params.b_q.tensor)
    if use_bilinear:
        lin = dn.add(dn.bilinear_form(b, params.k_q.tensor, a), lin)
    return dn.leaky_relu(lin, LEAKY_SLOPE)


def gru_step(x: dn.Tensor, h_prev: dn.Tensor, params: GruParams) -> dn.Tensor:
    if x.shape != (params.input_size,) or h_prev.shape != (params.hidden_size,):
        raise ShapeError(
            f"gru_step: got x {x.shape}, h {h_prev.shape}; expected"
            f" ({params.input_size},), ({params.hidden_size},)"
        )
    z = dn.sigmoid(dn.add(dn.add(dn.matmul(x, params.w_z.tensor),
                                 dn.matmul(h_prev, params.u_z.tensor)),
                          params.b_z.tensor))
    r = dn.sigmoid(dn.add(dn.add(dn.matmul(x, params.w_r.tensor),
                                 dn.matmul(h_prev, params.u_r.tensor)),
                          params.b_r.tensor))
    h_tilde = dn.tanh(dn.add(dn.add(dn.matmul(x, params.w_h.tensor),
                                    dn.matmul(dn.elementwise_mul(r, h_prev),
                                              params.u_h.tensor)),
                             params.b_h.tensor))
    keep = dn.affine(z, -1.0, 1.0)  # 1 - z
    return dn.add(dn.elementwise_mul(keep, h_prev), dn.elementwise_mul(z, h_tilde))


def encode_embedded(rows: dn.Tensor, q_vec: dn.Tensor,
                    params: GruParams) -> list[dn.Tensor]:
    """Run the GRU over an N x d matrix of embedding rows.

    Returns all hidden states h_1..h_N (h_0 is the zero vector). The query
    enters at every step through the f-layer.
    """
    if rows.data.ndim != 2 or rows.data.shape[0] < 1:
        raise ShapeError(f"encode_embedded: need an N x d matrix, got {rows.shape}")
    fq = dn.matmul(q_vec, params.w_f.tensor)
    h = dn.zeros(params.hidden_size)
    states = []
    for tau in range(rows.data.shape[0]):
        x = dn.concat([dn.embedding_lookup(rows, tau), fq])
        h = gru_step(x, h, params)
        states.append(h)
    return states


def encode_trip(poi_ids, q_vec: dn.Tensor, emb, params: GruParams) -> list[dn.Tensor]:
    """Embed a POI id sequence and run the GRU over it."""
    missing = [p for p in poi_ids if p not in emb.index]
    if missing:
        raise VocabularyError(f"POIs not in model vocabulary: {missing}")
    rows = dn.embedding_lookup(emb.param.tensor, [emb.index[p] for p in poi_ids])
    return encode_embedded(rows, q_vec, params)
