"""Gradients of the fixed training objectives.

Only three composites are ever optimized, so each one gets a hand-assembled
backward pass built from the layer-level gradients:

* ``reconstruction``: the self-supervised graph loss — edge classification
  from pair logits (balanced positive/negative pairs) mixed with feature
  reconstruction through the linear decoder.
* ``loss_window``: the warm-up objective — squared error of the recurrent
  loss predictions over a frame window (backpropagation through time) plus
  the reconstruction loss of every frame.
* ``masked_cross_entropy``: node classification through the stacked graph
  convolution, scored on a node mask.

Anything else raises UnsupportedCompositeError.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UnsupportedCompositeError
from .layers import (LstmState, _lstm_cell, _lstm_cell_backward,
                     attention_backward, attention_forward, gcn_backward,
                     gcn_forward, masked_cross_entropy, pair_logits, sigmoid,
                     softplus)
from .params import ParamBundle

__all__ = [
    "WindowFrame",
    "reconstruction_grad",
    "reconstruction_eval",
    "window_grad",
    "window_eval",
    "masked_ce_grad",
    "composite_grad",
]


def _zero_grads(bundle: ParamBundle) -> dict:
    return {name: np.zeros_like(arr) for name, _, arr in bundle.entries()}


def _pair_array(pairs) -> np.ndarray:
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def _recon_terms(indptr, indices, O, extractor, decoder, pos_pairs,
                 neg_pairs, lam, slope):
    """Forward pass of the reconstruction loss plus the cotangent dF and the
    decoder gradient.  Returns (L_g, L_s, L_f, dF, d_mix, attention cache).
    """
    F, cache = attention_forward(indptr, indices, O, extractor["weight"],
                                 extractor["att_src"], extractor["att_dst"],
                                 slope)
    pos = _pair_array(pos_pairs)
    neg = _pair_array(neg_pairs)
    pairs = np.vstack([pos, neg])
    targets = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    logits = pair_logits(F, pairs)
    loss_s = float(np.mean(softplus(logits) - targets * logits))

    mix = decoder["mix"]
    resid = F @ mix.T - O
    loss_f = float(np.mean(resid * resid))
    loss_g = lam * loss_s + (1.0 - lam) * loss_f

    dF = np.zeros_like(F)
    dlogit = lam * (sigmoid(logits) - targets) / len(pairs)
    np.add.at(dF, pairs[:, 0], dlogit[:, None] * F[pairs[:, 1]])
    np.add.at(dF, pairs[:, 1], dlogit[:, None] * F[pairs[:, 0]])
    scale = (1.0 - lam) * 2.0 / resid.size
    dF += scale * (resid @ mix)
    d_mix = scale * (resid.T @ F)
    return loss_g, loss_s, loss_f, F, dF, d_mix, cache


def reconstruction_grad(indptr, indices, O, extractor: ParamBundle,
                        decoder: ParamBundle, pos_pairs, neg_pairs,
                        lam: float, slope: float = 0.2):
    """Loss and gradients of the mixed reconstruction objective.

    The edge-classification half flows only into the extractor; the feature
    half flows into both the extractor and the decoder.  Returns
    (loss, (loss_edges, loss_features), extractor grads, decoder grads).
    """
    loss_g, loss_s, loss_f, _, dF, d_mix, cache = _recon_terms(
        indptr, indices, O, extractor, decoder, pos_pairs, neg_pairs, lam,
        slope)
    d_weight, d_src, d_dst = attention_backward(cache, dF)
    g_ext = {"weight": d_weight, "att_src": d_src, "att_dst": d_dst}
    g_dec = {"mix": d_mix}
    return loss_g, (loss_s, loss_f), g_ext, g_dec


def reconstruction_eval(indptr, indices, O, extractor: ParamBundle,
                        decoder: ParamBundle, pos_pairs, neg_pairs,
                        lam: float, slope: float = 0.2):
    """Forward-only reconstruction objective: (loss, (edges, features))."""
    loss_g, loss_s, loss_f, _, _, _, _ = _recon_terms(
        indptr, indices, O, extractor, decoder, pos_pairs, neg_pairs, lam,
        slope)
    return loss_g, (loss_s, loss_f)


@dataclass(frozen=True)
class WindowFrame:
    """Prepared tensors of one warm-up frame.

    The loss-prediction path reads the clean view (actual structure and
    embeddings); the reconstruction loss reads the augmented view.  Both
    flow through the same extractor parameters."""

    clean_indptr: np.ndarray
    clean_indices: np.ndarray
    clean_O: np.ndarray
    aug_indptr: np.ndarray
    aug_indices: np.ndarray
    aug_O: np.ndarray
    pos_pairs: np.ndarray
    neg_pairs: np.ndarray
    target: float


def window_grad(frames, extractor: ParamBundle, predictor: ParamBundle,
                decoder: ParamBundle, lam: float, state0: LstmState,
                slope: float = 0.2):
    """Joint warm-up objective over a chronological frame window.

    total = sum_k (softplus(readout_k) - target_k)^2 + sum_k recon_k with
    the recurrent state threaded across frames; gradients run through the
    whole unrolled sequence (and into the extractor both via the pooled
    recurrent inputs on the clean views and via the reconstruction terms on
    the augmented views).

    Returns (total, diagnostics dict, extractor grads, predictor grads,
    decoder grads) where diagnostics carries per-frame predictions and the
    two loss sums.
    """
    g_ext = _zero_grads(extractor)
    g_pred = _zero_grads(predictor)
    g_dec = _zero_grads(decoder)

    h, c = state0.h, state0.c
    per_frame = []
    preds = []
    pred_sum = 0.0
    recon_sum = 0.0
    for fr in frames:
        loss_g, loss_s, loss_f, _, dF_aug, d_mix, aug_cache = _recon_terms(
            fr.aug_indptr, fr.aug_indices, fr.aug_O, extractor, decoder,
            fr.pos_pairs, fr.neg_pairs, lam, slope)
        F, clean_cache = attention_forward(
            fr.clean_indptr, fr.clean_indices, fr.clean_O,
            extractor["weight"], extractor["att_src"], extractor["att_dst"],
            slope)
        x = F.mean(axis=0)
        y, h, c, cell_cache = _lstm_cell(x, h, c, predictor)
        pred = float(softplus(y))
        err = pred - fr.target
        pred_sum += err * err
        recon_sum += loss_g
        preds.append(pred)
        per_frame.append((F.shape[0], dF_aug, d_mix, aug_cache, clean_cache,
                          cell_cache, y, err))

    dh_next = np.zeros_like(h)
    dc_next = np.zeros_like(c)
    for n_rows, dF_aug, d_mix, aug_cache, clean_cache, cell_cache, y, err \
            in reversed(per_frame):
        dy = 2.0 * err * float(sigmoid(y))
        dx, dh_next, dc_next = _lstm_cell_backward(
            cell_cache, predictor, dy, dh_next, dc_next, g_pred)
        dF_clean = np.tile(dx / n_rows, (n_rows, 1))
        for cache, dF in ((clean_cache, dF_clean), (aug_cache, dF_aug)):
            d_weight, d_src, d_dst = attention_backward(cache, dF)
            g_ext["weight"] += d_weight
            g_ext["att_src"] += d_src
            g_ext["att_dst"] += d_dst
        g_dec["mix"] += d_mix

    total = pred_sum + recon_sum
    diag = {"predictions": preds, "prediction_loss": pred_sum,
            "reconstruction_loss": recon_sum,
            "state": LstmState(h=h, c=c)}
    return total, diag, g_ext, g_pred, g_dec


def window_eval(frames, extractor: ParamBundle, predictor: ParamBundle,
                decoder: ParamBundle, lam: float, state0: LstmState,
                slope: float = 0.2):
    """Forward-only window objective on fixed views: (total, diagnostics).

    Used as the early-stopping metric, where the per-epoch training views
    are redrawn but the evaluation views stay pinned so that improvement
    comparisons are deterministic in the parameters.
    """
    h, c = state0.h, state0.c
    preds = []
    pred_sum = 0.0
    recon_sum = 0.0
    for fr in frames:
        loss_g, _, _, _, _, _, _ = _recon_terms(
            fr.aug_indptr, fr.aug_indices, fr.aug_O, extractor, decoder,
            fr.pos_pairs, fr.neg_pairs, lam, slope)
        F, _ = attention_forward(
            fr.clean_indptr, fr.clean_indices, fr.clean_O,
            extractor["weight"], extractor["att_src"], extractor["att_dst"],
            slope)
        y, h, c, _ = _lstm_cell(F.mean(axis=0), h, c, predictor)
        pred = float(softplus(y))
        pred_sum += (pred - fr.target) ** 2
        recon_sum += loss_g
        preds.append(pred)
    diag = {"predictions": preds, "prediction_loss": pred_sum,
            "reconstruction_loss": recon_sum,
            "state": LstmState(h=h, c=c)}
    return pred_sum + recon_sum, diag


def masked_ce_grad(L, X, weights, labels, mask=None, activation: str = "relu",
                   slope: float = 0.2):
    """Cross-entropy of the stacked-convolution classifier on masked rows;
    returns (loss, per-layer weight gradients)."""
    logits, cache = gcn_forward(L, X, weights, activation=activation,
                                slope=slope, final_activation=False)
    loss, dlogits = masked_cross_entropy(logits, labels, mask)
    return loss, gcn_backward(cache, dlogits, weights)


_COMPOSITES = {
    "reconstruction": reconstruction_grad,
    "loss_window": window_grad,
    "masked_cross_entropy": masked_ce_grad,
}


def composite_grad(name: str, /, **kwargs):
    """Dispatch to one of the supported training objectives by name."""
    try:
        fn = _COMPOSITES[name]
    except KeyError:
        raise UnsupportedCompositeError(
            f"no gradient pipeline named {name!r}; supported: "
            f"{sorted(_COMPOSITES)}") from None
    return fn(**kwargs)
