"""Forward passes and hand-derived gradients for the small model zoo.

Everything here is pure: outputs are functions of (inputs, parameters)
alone.  Backward passes consume the cache object returned by the matching
forward and produce gradients with the same shapes as the parameters.  The
set of supported architectures is deliberately tiny (stacked graph
convolutions, one attention layer, one LSTM cell, two linear decoders), so
each gradient is derived by hand instead of taping a general graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels as kernels
from ..errors import DimensionError, EmptyMaskError
from .params import ParamBundle

__all__ = [
    "LstmState",
    "sigmoid",
    "softplus",
    "gcn_forward",
    "gcn_backward",
    "attention_forward",
    "attention_backward",
    "gat_embed",
    "structure_decode",
    "pair_logits",
    "feature_decode",
    "lstm_step",
    "loss_mse",
    "loss_bce",
    "bce_with_logits",
    "masked_cross_entropy",
]

DEFAULT_SLOPE = 0.2


@dataclass(frozen=True)
class LstmState:
    """Recurrent hidden and cell vectors."""

    h: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64).reshape(-1)
        c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        if h.shape != c.shape:
            raise DimensionError("hidden and cell vectors disagree in size")
        if not (np.isfinite(h).all() and np.isfinite(c).all()):
            raise DimensionError("recurrent state must be finite")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "c", c)

    @classmethod
    def zeros(cls, hidden: int) -> "LstmState":
        return cls(h=np.zeros(hidden), c=np.zeros(hidden))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


# ---------------------------------------------------------------------------
# stacked graph convolution


def _activate(p: np.ndarray, activation: str, slope: float) -> np.ndarray:
    if activation == "relu":
        return np.maximum(p, 0.0)
    if activation == "leaky":
        return np.where(p >= 0, p, slope * p)
    if activation == "none":
        return p
    raise DimensionError(f"unknown activation {activation!r}")


def _activate_grad(p: np.ndarray, activation: str, slope: float) -> np.ndarray:
    if activation == "relu":
        return (p > 0).astype(np.float64)
    if activation == "leaky":
        return np.where(p >= 0, 1.0, slope)
    return np.ones_like(p)


@dataclass
class GcnCache:
    L: object
    inputs: list
    pre: list
    activation: str
    slope: float
    final_activation: bool


def gcn_forward(L, X, weights, activation: str = "relu",
                slope: float = DEFAULT_SLOPE, final_activation: bool = False):
    """Bias-free stacked graph convolution H <- act(L @ H @ W_l).

    ``weights`` is a sequence of 1 to 3 matrices; the last layer skips the
    activation unless ``final_activation`` is set (linear head for
    regression/logits).  Returns (output, cache) where the cache feeds
    :func:`gcn_backward`.
    """
    weights = list(weights)
    if not 1 <= len(weights) <= 3:
        raise DimensionError("supported depth is 1 to 3 layers")
    H = np.asarray(X, dtype=np.float64)
    if L.n != H.shape[0]:
        raise DimensionError(f"adjacency has {L.n} rows, input has "
                             f"{H.shape[0]}")
    inputs, pre = [], []
    for k, w in enumerate(weights):
        if H.shape[1] != w.shape[0]:
            raise DimensionError(
                f"layer {k} expects {w.shape[0]} columns, got {H.shape[1]}")
        mixed = L @ H
        inputs.append((H, mixed))
        p = mixed @ w
        pre.append(p)
        last = k == len(weights) - 1
        H = p if (last and not final_activation) else _activate(
            p, activation, slope)
    cache = GcnCache(L=L, inputs=inputs, pre=pre, activation=activation,
                     slope=slope, final_activation=final_activation)
    return H, cache


def gcn_backward(cache: GcnCache, d_out, weights):
    """Gradients of the stacked convolution w.r.t. each weight matrix."""
    weights = list(weights)
    grads = [None] * len(weights)
    dH = np.asarray(d_out, dtype=np.float64)
    for k in range(len(weights) - 1, -1, -1):
        last = k == len(weights) - 1
        if last and not cache.final_activation:
            dP = dH
        else:
            dP = dH * _activate_grad(cache.pre[k], cache.activation,
                                     cache.slope)
        _, mixed = cache.inputs[k]
        grads[k] = mixed.T @ dP
        if k > 0:
            dH = cache.L.matrix.T @ (dP @ weights[k].T)
    return grads


# ---------------------------------------------------------------------------
# one attention layer


@dataclass
class AttnCache:
    indptr: np.ndarray
    indices: np.ndarray
    O: np.ndarray
    wo: np.ndarray
    alpha: np.ndarray
    z: np.ndarray
    a_src: np.ndarray
    a_dst: np.ndarray
    slope: float


def attention_forward(indptr, indices, O, weight, att_src, att_dst,
                      slope: float = DEFAULT_SLOPE):
    """Single-head attention over a CSR neighborhood structure (rows must
    include the self entry).  Per row i the unnormalized score of entry j is
    LeakyReLU(att_src . (O_i W) + att_dst . (O_j W)); scores softmax within
    the row and weight the projected rows O_j W.  Returns (F, cache)."""
    O = np.asarray(O, dtype=np.float64)
    if O.shape[1] != weight.shape[0]:
        raise DimensionError(
            f"projection expects {weight.shape[0]} input columns, embeddings "
            f"have {O.shape[1]}")
    if weight.shape[1] != att_src.shape[0] or weight.shape[1] != att_dst.shape[0]:
        raise DimensionError("attention vectors disagree with projection width")
    if len(indptr) != O.shape[0] + 1:
        raise DimensionError("structure and embeddings disagree on node count")
    wo = O @ weight
    src = wo @ att_src
    dst = wo @ att_dst
    f, alpha, z = kernels.gat_forward(indptr, indices, src, dst, wo, slope)
    cache = AttnCache(indptr=indptr, indices=indices, O=O, wo=wo, alpha=alpha,
                      z=z, a_src=np.asarray(att_src, dtype=np.float64),
                      a_dst=np.asarray(att_dst, dtype=np.float64), slope=slope)
    return f, cache


def attention_backward(cache: AttnCache, dF):
    """Gradients of :func:`attention_forward` w.r.t. (weight, att_src,
    att_dst) given the output cotangent dF."""
    dF = np.ascontiguousarray(dF, dtype=np.float64)
    dwo, dsrc, ddst = kernels.gat_backward(
        cache.indptr, cache.indices, cache.alpha, cache.z, cache.wo, dF,
        cache.slope)
    dwo = dwo + np.outer(dsrc, cache.a_src) + np.outer(ddst, cache.a_dst)
    d_weight = cache.O.T @ dwo
    d_src = cache.wo.T @ dsrc
    d_dst = cache.wo.T @ ddst
    return d_weight, d_src, d_dst


def gat_embed(s, O, extractor: ParamBundle, slope: float = DEFAULT_SLOPE):
    """Snapshot-level attention embedding: runs :func:`attention_forward`
    on the snapshot's self-looped neighborhood structure."""
    indptr, indices = s.csr_with_self_loops()
    f, _ = attention_forward(indptr, indices, O, extractor["weight"],
                             extractor["att_src"], extractor["att_dst"],
                             slope)
    return f


# ---------------------------------------------------------------------------
# decoders


def structure_decode(F) -> np.ndarray:
    """Dense reconstructed adjacency: entry (i, j) is logistic(F_i . F_j)."""
    F = np.asarray(F, dtype=np.float64)
    return sigmoid(F @ F.T)


def pair_logits(F, pairs) -> np.ndarray:
    """Edge logits F_u . F_v for an array of (u, v) pairs."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.einsum("eb,eb->e", F[pairs[:, 0]], F[pairs[:, 1]])


def feature_decode(F, mix) -> np.ndarray:
    """Single linear decoder from extractor space back to embedding space."""
    F = np.asarray(F, dtype=np.float64)
    mix = np.asarray(mix, dtype=np.float64)
    if F.shape[1] != mix.shape[1]:
        raise DimensionError(
            f"decoder expects {mix.shape[1]} columns, embeddings have "
            f"{F.shape[1]}")
    return F @ mix.T


# ---------------------------------------------------------------------------
# LSTM cell with scalar readout


def _split_gates(z, hidden):
    return z[:hidden], z[hidden:2 * hidden], z[2 * hidden:3 * hidden], \
        z[3 * hidden:]


def _lstm_cell(x, h, c, p: ParamBundle):
    hidden = len(h)
    z = p["in_weight"] @ x + p["rec_weight"] @ h + p["gate_bias"]
    zi, zf, zg, zo = _split_gates(z, hidden)
    gi, gf, go = sigmoid(zi), sigmoid(zf), sigmoid(zo)
    gg = np.tanh(zg)
    c2 = gf * c + gi * gg
    tanh_c2 = np.tanh(c2)
    h2 = go * tanh_c2
    y = float(p["readout_weight"] @ h2 + p["readout_bias"][0])
    cache = (x, h, c, gi, gf, gg, go, c2, tanh_c2, h2)
    return y, h2, c2, cache


def _lstm_cell_backward(cache, p: ParamBundle, dy, dh_next, dc_next, grads):
    """Accumulates parameter gradients into ``grads`` (name-keyed dict) and
    returns (dx, dh_prev, dc_prev)."""
    x, h, c, gi, gf, gg, go, c2, tanh_c2, h2 = cache
    grads["readout_weight"] += dy * h2
    grads["readout_bias"] += dy
    dh2 = dy * p["readout_weight"] + dh_next
    dgo = dh2 * tanh_c2
    dc2 = dh2 * go * (1.0 - tanh_c2 ** 2) + dc_next
    dgf = dc2 * c
    dc_prev = dc2 * gf
    dgi = dc2 * gg
    dgg = dc2 * gi
    dzi = dgi * gi * (1.0 - gi)
    dzf = dgf * gf * (1.0 - gf)
    dzg = dgg * (1.0 - gg ** 2)
    dzo = dgo * go * (1.0 - go)
    dz = np.concatenate([dzi, dzf, dzg, dzo])
    grads["in_weight"] += np.outer(dz, x)
    grads["rec_weight"] += np.outer(dz, h)
    grads["gate_bias"] += dz
    dx = p["in_weight"].T @ dz
    dh_prev = p["rec_weight"].T @ dz
    return dx, dh_prev, dc_prev


def lstm_step(x, state: LstmState, predictor: ParamBundle):
    """One recurrent step; returns (linear readout, advanced state).

    The readout is the raw linear map of the new hidden state; callers that
    need a non-negative prediction apply softplus on top.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if predictor["in_weight"].shape[1] != x.shape[0]:
        raise DimensionError(
            f"recurrent input expects {predictor['in_weight'].shape[1]} "
            f"entries, got {x.shape[0]}")
    if predictor["rec_weight"].shape[1] != state.h.shape[0]:
        raise DimensionError("recurrent state disagrees with parameters")
    y, h2, c2, _ = _lstm_cell(x, state.h, state.c, predictor)
    return y, LstmState(h=h2, c=c2)


# ---------------------------------------------------------------------------
# losses


def loss_mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(
            f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def loss_bce(probs, targets) -> float:
    """Mean binary cross-entropy on probabilities; the value path clamps
    probabilities to [1e-12, 1 - 1e-12] so saturated inputs stay finite."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape:
        raise DimensionError(
            f"probability shape {probs.shape} != target shape "
            f"{targets.shape}")
    p = np.clip(probs, 1e-12, 1.0 - 1e-12)
    return float(np.mean(-targets * np.log(p)
                         - (1.0 - targets) * np.log1p(-p)))


def bce_with_logits(logits, targets) -> float:
    """Mean binary cross-entropy evaluated from logits: softplus(x) - t x.
    Stable for large |x|; gradient w.r.t. x is (sigmoid(x) - t) / count."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise DimensionError(
            f"logit shape {logits.shape} != target shape {targets.shape}")
    return float(np.mean(softplus(logits) - targets * logits))


def masked_cross_entropy(logits, labels, mask=None):
    """Mean multi-class cross-entropy over the masked rows.

    Returns (loss, dlogits) with dlogits already divided by the number of
    scored rows and zero outside the mask.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise DimensionError("logits and labels disagree on row count")
    rows = np.arange(logits.shape[0]) if mask is None \
        else np.asarray(mask, dtype=np.int64).reshape(-1)
    if len(rows) == 0:
        raise EmptyMaskError("no rows to score")
    sel = logits[rows]
    shift = sel - sel.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shift).sum(axis=1)) + sel.max(axis=1)
    picked = sel[np.arange(len(rows)), labels[rows]]
    loss = float(np.mean(lse - picked))
    soft = np.exp(shift)
    soft /= soft.sum(axis=1, keepdims=True)
    soft[np.arange(len(rows)), labels[rows]] -= 1.0
    dlogits = np.zeros_like(logits)
    dlogits[rows] = soft / len(rows)
    return loss, dlogits
