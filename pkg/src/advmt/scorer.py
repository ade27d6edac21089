"""Query-reply matching: quadratic feature, two-layer MLP scorer, hinge loss.

The feature vector for a (query, reply) representation pair is
q (+) r (+) [q^T M r]; the hidden layer is tanh, the output sigmoid, so
the score is always in (0, 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .numerics import Parameter, Tensor


@dataclass
class ScorerParams:
    m: Parameter          # d_q x d_r bilinear matrix
    w1: Parameter         # (d_q + d_r + 1) x d_m2
    b1: Parameter         # d_m2
    w2: Parameter         # d_m2
    b2: Parameter         # scalar

    def all(self):
        return [self.m, self.w1, self.b1, self.w2, self.b2]


def init_scorer(d_q: int, d_r: int, d_m2: int, scope: str, prefix: str,
                rng: np.random.Generator) -> ScorerParams:
    d_in = d_q + d_r + 1
    bound = 1.0 / np.sqrt(d_in)
    return ScorerParams(
        m=Parameter(rng.uniform(-bound, bound, size=(d_q, d_r)), scope, f"{prefix}.m"),
        w1=Parameter(rng.uniform(-bound, bound, size=(d_in, d_m2)), scope, f"{prefix}.w1"),
        b1=Parameter(np.zeros(d_m2), scope, f"{prefix}.b1"),
        w2=Parameter(rng.uniform(-bound, bound, size=(d_m2,)), scope, f"{prefix}.w2"),
        b2=Parameter(np.zeros(()), scope, f"{prefix}.b2"),
    )


def quadratic_feature(q: Tensor, r: Tensor, m) -> Tensor:
    """q^T M r as a scalar tensor."""
    mat = m.m if isinstance(m, ScorerParams) else m
    return nm.dot(q, nm.matmul(mat, r))


def mlp_score(q: Tensor, r: Tensor, params: ScorerParams) -> Tensor:
    feature = nm.concat([q, r, quadratic_feature(q, r, params.m)])
    hidden = nm.tanh(nm.matmul(feature, params.w1) + params.b1)
    return nm.sigmoid(nm.dot(hidden, params.w2) + params.b2)


def hinge_loss(score_pos: Tensor, score_neg: Tensor, delta: float) -> Tensor:
    """max(0, delta - score_pos + score_neg); subgradient 0 on the flat part."""
    if delta <= 0:
        raise ValueError(f"margin must be positive, got {delta}")
    return nm.relu(nm.Tensor(np.float64(delta)) - score_pos + score_neg)
