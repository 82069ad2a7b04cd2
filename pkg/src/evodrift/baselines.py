"""Comparison estimators: linear extrapolation of observed losses,
confidence-difference regression, and the label-buying supervised oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DegenerateFitError, InsufficientHistoryError,
                     NotClassificationError)
from .estimator import (EstimatorState, ObservationSet, _epoch_frame,
                        _thread_clean_pass, _apply_update, observed_loss,
                        predict)
from .nn import LstmState, window_eval, window_grad

__all__ = [
    "LinearFit",
    "DocFit",
    "linear_fit",
    "linear_predict",
    "average_confidence",
    "doc_fit",
    "doc_predict",
    "OracleConfig",
    "supervised_oracle",
]


# ---------------------------------------------------------------------------
# linear extrapolation of the observed loss curve


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float


def linear_fit(points) -> LinearFit:
    """Ordinary least squares through (time, loss) points."""
    pts = [(float(t), float(v)) for t, v in points]
    if len(pts) < 2:
        raise DegenerateFitError("need at least two points")
    t = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.all(t == t[0]):
        raise DegenerateFitError("need at least two distinct times")
    slope, intercept = np.polyfit(t, v, 1)
    return LinearFit(slope=float(slope), intercept=float(intercept))


def linear_predict(fit: LinearFit, time: float) -> float:
    return max(0.0, fit.slope * float(time) + fit.intercept)


# ---------------------------------------------------------------------------
# confidence-difference regression (classification only)


@dataclass(frozen=True)
class DocFit:
    base_confidence: float
    base_loss: float
    slope: float


def average_confidence(model, s) -> float:
    """Mean over nodes of the maximum softmax probability of the model's
    logits."""
    logits = np.asarray(model.predict(s), dtype=np.float64)
    if logits.ndim != 2:
        raise NotClassificationError(
            "confidence needs per-class logits; this model is not a "
            "classifier")
    shift = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shift)
    probs /= probs.sum(axis=1, keepdims=True)
    return float(probs.max(axis=1).mean())


def doc_fit(observations: ObservationSet) -> DocFit:
    """Regress observed loss differences on average-confidence differences
    over the warm-up window; the earliest frame anchors both baselines.

    The slope is least squares through the origin, so an unchanged
    confidence always predicts the anchor loss.
    """
    if observations.task != "classification":
        raise NotClassificationError(
            "confidence-difference estimation applies to classification "
            "tasks only")
    if len(observations) < 2:
        raise InsufficientHistoryError("need at least two warm-up frames")
    model = observations.model
    conf = [average_confidence(model, s) for s in observations.frames]
    loss = [observed_loss(model.predict(s), s, observations.task)
            for s in observations.frames]
    x = np.array(conf[1:]) - conf[0]
    y = np.array(loss[1:]) - loss[0]
    denom = float(x @ x)
    # confidences live in (0, 1]; differences at rounding scale carry no
    # signal, so an (almost) unchanged confidence track fits a flat line
    slope = float(x @ y) / denom if denom > 1e-24 else 0.0
    return DocFit(base_confidence=conf[0], base_loss=loss[0], slope=slope)


def doc_predict(fit: DocFit, model, s) -> float:
    delta = average_confidence(model, s) - fit.base_confidence
    return max(0.0, fit.base_loss + fit.slope * delta)


# ---------------------------------------------------------------------------
# supervised oracle


@dataclass(frozen=True)
class OracleConfig:
    """Continuation-training schedule of the supervised oracle."""

    window: int = 6
    epochs: int = 30
    patience: int = 10

    def __post_init__(self):
        if self.window < 2 or self.epochs < 1 or self.patience < 1:
            raise ConfigError("oracle schedule out of range")


def supervised_oracle(test_frames, label_source, state: EstimatorState,
                      observations: ObservationSet,
                      oracle_cfg: OracleConfig, rng) -> list[float]:
    """Upper-reference estimator that keeps buying labels after deployment.

    For each test frame it obtains a freshly masked, labeled copy from
    ``label_source`` (the harness's audited gate; index-aligned with
    ``test_frames``), scores the frozen model on that mask, continues
    supervised training of the whole estimator on a sliding window of the
    most recent labeled frames, and then predicts the frame's loss.  The
    label gate raises when the run is not flagged for supervised access, so
    an unflagged run aborts on the first frame.
    """
    cfg = state.config
    model = observations.model
    window = [(s, model.embed(s),
               observed_loss(model.predict(s), s, observations.task))
              for s in observations.frames]
    out_state = state.clone()
    preds = []
    for idx, frame in enumerate(test_frames):
        labeled = label_source(idx)
        target = observed_loss(model.predict(labeled), labeled,
                               observations.task)
        window.append((labeled, model.embed(labeled), target))
        window = window[-oracle_cfg.window:]

        frng = rng.child(f"frame{idx}")
        evr = frng.child("eval")
        eval_frames = [_epoch_frame(s, O, t, cfg, evr.child(f"frame{k}"))
                       for k, (s, O, t) in enumerate(window)]
        state0 = LstmState.zeros(cfg.hidden_dim)
        best = (np.inf, None)
        since_best = 0
        for epoch in range(oracle_cfg.epochs):
            er = frng.child(f"epoch{epoch}")
            packed = [_epoch_frame(s, O, t, cfg, er.child(f"frame{k}"))
                      for k, (s, O, t) in enumerate(window)]
            _, _, g_ext, g_pred, g_dec = window_grad(
                packed, out_state.extractor, out_state.predictor,
                out_state.decoder, cfg.lam, state0,
                slope=cfg.attention_slope)
            _apply_update(out_state, "extractor", g_ext)
            _apply_update(out_state, "predictor", g_pred)
            _apply_update(out_state, "decoder", g_dec)
            score, _ = window_eval(eval_frames, out_state.extractor,
                                   out_state.predictor, out_state.decoder,
                                   cfg.lam, state0, slope=cfg.attention_slope)
            if score < best[0] - 1e-12:
                best = (score, (out_state.extractor.copy(),
                                out_state.predictor.copy(),
                                out_state.decoder.copy()))
                since_best = 0
            else:
                since_best += 1
                if since_best >= oracle_cfg.patience:
                    break
        if best[1] is not None:
            out_state.extractor, out_state.predictor, out_state.decoder = \
                best[1]

        _thread_clean_pass(out_state, [w[0] for w in window[:-1]],
                           [w[1] for w in window[:-1]])
        pred, out_state = predict(out_state, frame, model)
        preds.append(pred)
    return preds
