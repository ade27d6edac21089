"""Word embeddings and bidirectional LSTM sentence encoding.

A sentence is encoded by running a forward LSTM over x_1..x_T and a
backward LSTM over x_T..x_1 and concatenating the two final hidden
states, giving a fixed 2*d_h representation for any length T >= 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .numerics import Parameter, ShapeError, Tensor


@dataclass
class EmbeddingTable:
    """V x d_e lookup table; row 0 (PAD) stays zero and receives no updates."""

    weight: Parameter

    @property
    def vocab_size(self) -> int:
        return self.weight.value.shape[0]

    @property
    def dim(self) -> int:
        return self.weight.value.shape[1]


def init_embedding(vocab_size: int, dim: int, scope: str, name: str,
                   rng: np.random.Generator) -> EmbeddingTable:
    w = rng.uniform(-0.1, 0.1, size=(vocab_size, dim))
    w[0] = 0.0
    return EmbeddingTable(Parameter(w, scope, name, freeze_rows=(0,)))


@dataclass
class LstmParams:
    """Gate weights (d_h x (d_e + d_h)) and biases (d_h) for one direction."""

    w_i: Parameter
    w_f: Parameter
    w_o: Parameter
    w_c: Parameter
    b_i: Parameter
    b_f: Parameter
    b_o: Parameter
    b_c: Parameter

    @property
    def hidden_dim(self) -> int:
        return self.w_i.value.shape[0]

    def all(self):
        return [self.w_i, self.w_f, self.w_o, self.w_c,
                self.b_i, self.b_f, self.b_o, self.b_c]


def init_lstm(input_dim: int, hidden_dim: int, scope: str, prefix: str,
              rng: np.random.Generator) -> LstmParams:
    bound = 1.0 / np.sqrt(hidden_dim)

    def w(gate):
        return Parameter(
            rng.uniform(-bound, bound, size=(hidden_dim, input_dim + hidden_dim)),
            scope, f"{prefix}.w_{gate}")

    def b(gate, init):
        return Parameter(np.full(hidden_dim, init), scope, f"{prefix}.b_{gate}")

    # forget-gate bias starts at 1.0 to keep early memory open
    return LstmParams(w("i"), w("f"), w("o"), w("c"),
                      b("i", 0.0), b("f", 1.0), b("o", 0.0), b("c", 0.0))


def embed(ids, table: EmbeddingTable) -> Tensor:
    """Look up ids as a (T, d_e) tensor."""
    ids = list(ids)
    if not ids:
        raise ShapeError("embed: empty id sequence")
    for i in ids:
        if not 0 <= i < table.vocab_size:
            raise ShapeError(
                f"embed: id {i} out of range for vocabulary size {table.vocab_size}")
    return nm.gather_rows(table.weight, ids)


def lstm_cell(x_t: Tensor, h_prev: Tensor, c_prev: Tensor,
              params: LstmParams) -> tuple[Tensor, Tensor]:
    """One step of the standard (non-peephole) LSTM."""
    z = nm.concat([x_t, h_prev])
    i = nm.sigmoid(nm.matmul(params.w_i, z) + params.b_i)
    f = nm.sigmoid(nm.matmul(params.w_f, z) + params.b_f)
    o = nm.sigmoid(nm.matmul(params.w_o, z) + params.b_o)
    g = nm.tanh(nm.matmul(params.w_c, z) + params.b_c)
    c_t = f * c_prev + i * g
    h_t = o * nm.tanh(c_t)
    return h_t, c_t


def _scan(xs, params: LstmParams) -> Tensor:
    d_h = params.hidden_dim
    h, c = nm.zeros(d_h), nm.zeros(d_h)
    for x in xs:
        h, c = lstm_cell(x, h, c, params)
    return h


def bilstm_encode(ids, table: EmbeddingTable, fwd: LstmParams,
                  bwd: LstmParams) -> Tensor:
    """Encode a token-id sequence into the concatenated final states (2*d_h)."""
    xs_mat = embed(ids, table)
    xs = [nm.row(xs_mat, t) for t in range(len(list(ids)))]
    return nm.concat([_scan(xs, fwd), _scan(list(reversed(xs)), bwd)])
