"""Frozen models whose future loss the estimators try to predict.

Both models are trained once on the initial snapshot and never updated
afterwards.  Each exposes ``predict`` (task outputs), ``embed`` (the node
embedding matrix handed to the estimator), and ``task``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyMaskError, MissingLabelsError
from .graphs import GraphSnapshot, normalize
from .nn import AdamState, adam_update, gcn_bundle, gcn_forward, masked_ce_grad
from .theory import fit_linear_gcn

__all__ = [
    "LinearGcnModel",
    "GcnClassifierModel",
    "train_linear_gcn",
    "train_gcn_classifier",
]


@dataclass(frozen=True)
class LinearGcnModel:
    """One-layer linear graph convolution fit by least squares.

    Predictions are the scalar regression head; the embedding widens that
    single column with the mixed feature matrix so the estimator's extractor
    has something to work with.
    """

    weights: np.ndarray
    task: str = "regression"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def embed_dim(self) -> int:
        return len(self.weights) + 1

    def predict(self, s: GraphSnapshot) -> np.ndarray:
        return (normalize(s) @ s.features) @ self.weights

    def embed(self, s: GraphSnapshot) -> np.ndarray:
        mixed = normalize(s) @ s.features
        return np.hstack([(mixed @ self.weights)[:, None], mixed])


def train_linear_gcn(s: GraphSnapshot) -> LinearGcnModel:
    """Least-squares fit on the snapshot's masked nodes."""
    if s.mask is None or len(s.mask) == 0:
        raise EmptyMaskError("pretraining needs a labeled node mask")
    y = s.labels.astype(np.float64)
    if not np.isfinite(y[s.mask]).all():
        raise MissingLabelsError("labels missing at masked nodes")
    w = fit_linear_gcn(normalize(s), s.features, y, mask=s.mask)
    return LinearGcnModel(weights=w)


@dataclass(frozen=True)
class GcnClassifierModel:
    """Stacked graph convolution with relu hidden layers and a linear
    logits head."""

    weights: tuple
    task: str = "classification"

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        for w in ws:
            w.setflags(write=False)
        object.__setattr__(self, "weights", ws)

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def embed_dim(self) -> int:
        return self.weights[-1].shape[0]

    def predict(self, s: GraphSnapshot) -> np.ndarray:
        logits, _ = gcn_forward(normalize(s), s.features, list(self.weights),
                                activation="relu", final_activation=False)
        return logits

    def embed(self, s: GraphSnapshot) -> np.ndarray:
        """Penultimate activations: the hidden representation right before
        the logits head."""
        hidden, _ = gcn_forward(normalize(s), s.features,
                                list(self.weights[:-1]), activation="relu",
                                final_activation=True)
        return hidden


def train_gcn_classifier(s: GraphSnapshot, n_classes: int, rng,
                         hidden: int = 16, layers: int = 2,
                         epochs: int = 200, lr: float = 0.01
                         ) -> GcnClassifierModel:
    """Adam training of the masked cross-entropy on one snapshot."""
    if s.mask is None or len(s.mask) == 0:
        raise EmptyMaskError("pretraining needs a labeled node mask")
    if layers < 2:
        raise ConfigError("the classifier needs a hidden layer")
    dims = [s.feature_dim] + [hidden] * (layers - 1) + [n_classes]
    bundle = gcn_bundle(dims, rng)
    weights = [bundle[f"layer{k}"] for k in range(layers)]
    L = normalize(s)
    adam = AdamState.zeros(sum(w.size for w in weights), lr=lr)
    for _ in range(epochs):
        _, grads = masked_ce_grad(L, s.features, weights, s.labels, s.mask)
        flat = np.concatenate([w.ravel() for w in weights])
        gflat = np.concatenate([g.ravel() for g in grads])
        flat, adam = adam_update(flat, gflat, adam)
        at = 0
        rebuilt = []
        for w in weights:
            rebuilt.append(flat[at: at + w.size].reshape(w.shape))
            at += w.size
        weights = rebuilt
    return GcnClassifierModel(weights=tuple(weights))
