"""Self-supervised loss estimator for a frozen graph model.

The estimator watches a short labeled warm-up window, learns to map pooled
attention embeddings of each snapshot to the model's observed loss with a
recurrent predictor, and afterwards adapts only its representation pathway
(attention extractor plus feature decoder) to each unlabeled future snapshot
through a graph-reconstruction objective.  The recurrent predictor stays
frozen after warm-up and labels are never read post-deployment; the harness
enforces that contract and this module asserts it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DimensionError, EmptyMaskError,
                     InsufficientHistoryError, LabelAccessError,
                     MissingLabelsError)
from .graphs import AugmentationSpec, GraphSnapshot, augment
from .nn import (AdamState, LstmState, ParamBundle, WindowFrame, adam_update,
                 decoder_bundle, extractor_bundle, gat_embed, load_params,
                 lstm_step, masked_cross_entropy, predictor_bundle,
                 reconstruction_eval, reconstruction_grad, save_params,
                 softplus, window_eval, window_grad)

__all__ = [
    "EstimatorConfig",
    "EstimatorState",
    "ObservationSet",
    "observed_loss",
    "full_loss",
    "recon_loss",
    "pooled_input",
    "init_estimator",
    "warmup",
    "finetune",
    "predict",
    "save_estimator",
    "load_estimator",
]

_COMPONENTS = ("extractor", "predictor", "decoder")


@dataclass(frozen=True)
class EstimatorConfig:
    """Hyperparameters of the estimator.

    rnn_dim is the attention-extractor output width and therefore the
    recurrent input width; hidden_dim sizes the recurrent state.  lam mixes
    the two reconstruction losses (1.0 = structure only, 0.0 = features
    only).  Early stopping halts training after ``patience`` epochs without
    objective improvement.
    """

    rnn_dim: int = 16
    hidden_dim: int = 16
    lam: float = 0.5
    warmup_epochs: int = 200
    finetune_epochs: int = 100
    patience: int = 20
    lr: float = 0.01
    augmentation: AugmentationSpec = field(
        default_factory=lambda: AugmentationSpec("drop_edge", 0.2))
    attention_slope: float = 0.2
    pool: str = "mean"

    def __post_init__(self):
        if self.rnn_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("embedding widths must be positive")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("loss mix weight must lie in [0, 1]")
        if self.warmup_epochs < 1 or self.finetune_epochs < 0:
            raise ConfigError("epoch counts out of range")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.pool != "mean":
            raise ConfigError(f"unknown pooling {self.pool!r}")


@dataclass
class EstimatorState:
    """Trainable parameters plus the threaded recurrent state."""

    extractor: ParamBundle
    predictor: ParamBundle
    decoder: ParamBundle
    lstm_state: LstmState
    adam: dict
    config: EstimatorConfig
    warmup_steps: int = 0
    finetune_steps: int = 0

    def __post_init__(self):
        hidden = self.predictor["rec_weight"].shape[1]
        if self.lstm_state.h.shape[0] != hidden:
            raise DimensionError(
                "recurrent state width disagrees with the predictor")

    def clone(self) -> "EstimatorState":
        return EstimatorState(
            extractor=self.extractor.copy(), predictor=self.predictor.copy(),
            decoder=self.decoder.copy(),
            lstm_state=LstmState(h=self.lstm_state.h.copy(),
                                 c=self.lstm_state.c.copy()),
            adam=dict(self.adam), config=self.config,
            warmup_steps=self.warmup_steps,
            finetune_steps=self.finetune_steps)


@dataclass(frozen=True)
class ObservationSet:
    """Labeled warm-up window: chronological snapshots that each carry a
    non-empty observation mask, plus the frozen model under study."""

    frames: tuple
    model: object
    task: str

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.task not in ("regression", "classification"):
            raise ConfigError(f"unknown task {self.task!r}")
        for k, s in enumerate(self.frames):
            if s.labels is None:
                raise MissingLabelsError(f"warm-up frame {k} has no labels")
            if s.mask is None or len(s.mask) == 0:
                raise EmptyMaskError(f"warm-up frame {k} has an empty mask")

    def __len__(self):
        return len(self.frames)


# ---------------------------------------------------------------------------
# losses of the frozen model


def observed_loss(outputs, s: GraphSnapshot, task: str) -> float:
    """Mean loss of the frozen model's outputs over the masked nodes only:
    squared error for regression, cross-entropy for classification."""
    if s.mask is None or len(s.mask) == 0:
        raise EmptyMaskError("observed loss needs a non-empty mask")
    if s.labels is None:
        raise MissingLabelsError("observed loss needs labels at the mask")
    outputs = np.asarray(outputs, dtype=np.float64)
    mask = s.mask
    if task == "regression":
        diff = outputs.reshape(-1)[mask] - s.labels[mask]
        if not np.isfinite(diff).all():
            raise MissingLabelsError("labels missing at masked nodes")
        return float(np.mean(diff * diff))
    loss, _ = masked_cross_entropy(outputs, s.labels, mask)
    return loss


def full_loss(outputs, s: GraphSnapshot, task: str) -> float:
    """Ground-truth mean loss over every node; evaluation only."""
    if s.labels is None:
        raise MissingLabelsError("full loss needs labels for all nodes")
    outputs = np.asarray(outputs, dtype=np.float64)
    if task == "regression":
        labels = s.labels.astype(np.float64)
        if not np.isfinite(labels).all():
            raise MissingLabelsError("full loss needs labels for all nodes")
        diff = outputs.reshape(-1) - labels
        return float(np.mean(diff * diff))
    loss, _ = masked_cross_entropy(outputs, s.labels, None)
    return loss


def pooled_input(F) -> np.ndarray:
    """Column-wise mean over nodes: the permutation-invariant recurrent
    input."""
    F = np.asarray(F, dtype=np.float64)
    if F.size == 0:
        raise DimensionError("cannot pool an empty embedding matrix")
    return F.mean(axis=0)


# ---------------------------------------------------------------------------
# reconstruction plumbing


def _edge_keys(edges: np.ndarray, n: int) -> np.ndarray:
    return edges[:, 0].astype(np.int64) * n + edges[:, 1].astype(np.int64)


def _sample_negative_pairs(s: GraphSnapshot, count: int, rng) -> np.ndarray:
    """Uniform non-edge, non-self pairs (u < v), excluding true edges."""
    if count == 0 or s.n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    existing = _edge_keys(s.edges, s.n)
    out = []
    have = 0
    while have < count:
        u = rng.integers(0, s.n, size=2 * count)
        v = rng.integers(0, s.n, size=2 * count)
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        ok = lo < hi
        lo, hi = lo[ok], hi[ok]
        keys = lo * s.n + hi
        fresh = ~np.isin(keys, existing)
        pairs = np.stack([lo[fresh], hi[fresh]], axis=1)
        out.append(pairs)
        have += len(pairs)
    return np.vstack(out)[:count]


def _augmented_view(s: GraphSnapshot, O: np.ndarray, spec: AugmentationSpec,
                    rng):
    """Structure and embeddings seen by the extractor for one training
    epoch.  Feature masking zeroes rows of the embedding matrix (the
    extractor's actual input); the other kinds rewire the snapshot."""
    if spec.kind == "mask_feature":
        dropped = rng.random(O.shape[0]) < spec.p
        O2 = O.copy()
        O2[dropped] = 0.0
        indptr, indices = s.csr_with_self_loops()
        return indptr, indices, O2
    aug = augment(s, spec, rng)
    indptr, indices = aug.csr_with_self_loops()
    return indptr, indices, O


def _epoch_frame(s: GraphSnapshot, O: np.ndarray, target: float,
                 cfg: EstimatorConfig, rng) -> WindowFrame:
    indptr, indices, O_in = _augmented_view(s, O, cfg.augmentation,
                                            rng.child("aug"))
    clean_indptr, clean_indices = s.csr_with_self_loops()
    neg = _sample_negative_pairs(s, len(s.edges), rng.child("neg"))
    return WindowFrame(clean_indptr=clean_indptr,
                       clean_indices=clean_indices, clean_O=O,
                       aug_indptr=indptr, aug_indices=indices, aug_O=O_in,
                       pos_pairs=s.edges, neg_pairs=neg, target=target)


def recon_loss(state: EstimatorState, s: GraphSnapshot, model, rng):
    """One evaluation of the self-supervised objective on a fresh augmented
    view, with gradients for the extractor and decoder.

    Returns (loss, (structure part, feature part), extractor grads, decoder
    grads)."""
    cfg = state.config
    O = model.embed(s)
    fr = _epoch_frame(s, O, 0.0, cfg, rng)
    return reconstruction_grad(
        fr.aug_indptr, fr.aug_indices, fr.aug_O, state.extractor,
        state.decoder, pos_pairs=fr.pos_pairs, neg_pairs=fr.neg_pairs,
        lam=cfg.lam, slope=cfg.attention_slope)


# ---------------------------------------------------------------------------
# training


def init_estimator(embed_dim: int, cfg: EstimatorConfig, rng
                   ) -> EstimatorState:
    """Fresh state with uniform fan-in-scaled parameters."""
    return EstimatorState(
        extractor=extractor_bundle(embed_dim, cfg.rnn_dim, rng.child("ext")),
        predictor=predictor_bundle(cfg.rnn_dim, cfg.hidden_dim,
                                   rng.child("pred")),
        decoder=decoder_bundle(embed_dim, cfg.rnn_dim, rng.child("dec")),
        lstm_state=LstmState.zeros(cfg.hidden_dim),
        adam={}, config=cfg)


def _adam_for(state: EstimatorState, name: str, size: int) -> AdamState:
    st = state.adam.get(name)
    if st is None or st.m.shape[0] != size:
        st = AdamState.zeros(size, lr=state.config.lr)
    return st


def _apply_update(state: EstimatorState, name: str, grads: dict) -> None:
    bundle: ParamBundle = getattr(state, name)
    flat = bundle.flatten()
    gflat = bundle.flatten_like(grads)
    new_flat, new_adam = adam_update(flat, gflat,
                                     _adam_for(state, name, flat.size))
    setattr(state, name, bundle.unflatten(new_flat))
    state.adam[name] = new_adam


def _thread_clean_pass(state: EstimatorState, snapshots, embeddings) -> None:
    """Advance the recurrent state across clean (unaugmented) frames."""
    st = LstmState.zeros(state.config.hidden_dim)
    for s, O in zip(snapshots, embeddings):
        F = gat_embed(s, O, state.extractor, state.config.attention_slope)
        _, st = lstm_step(pooled_input(F), st, state.predictor)
    state.lstm_state = st


def warmup(observations: ObservationSet, cfg: EstimatorConfig, rng
           ) -> EstimatorState:
    """Joint pre-deployment training over the labeled window.

    Each epoch redraws one augmented view and one negative-pair sample per
    frame, threads the recurrent state chronologically through the window,
    and takes one Adam step per component on the summed objective (squared
    loss-prediction error plus reconstruction).  The recurrent state resets
    between epochs.

    Early stopping scores every epoch on one pinned evaluation view per
    frame, drawn before training starts; the training views are redrawn
    each epoch, so comparing their objective values across epochs would
    confuse sampling luck with progress.  Training halts once the score
    has not improved for `patience` epochs, keeping the parameters as they
    stand.  A final pass over the clean frames leaves the recurrent state
    ready for the first post-deployment prediction.
    """
    if len(observations) < 2:
        raise InsufficientHistoryError(
            "warm-up needs at least two labeled frames")
    frames = observations.frames
    model = observations.model
    embeddings = [model.embed(s) for s in frames]
    targets = [observed_loss(model.predict(s), s, observations.task)
               for s in frames]
    embed_dim = embeddings[0].shape[1]

    evr = rng.child("eval")
    eval_frames = [_epoch_frame(s, O, t, cfg, evr.child(f"frame{k}"))
                   for k, (s, O, t) in
                   enumerate(zip(frames, embeddings, targets))]

    state = init_estimator(embed_dim, cfg, rng.child("init"))
    # Start the readout at the inverse softplus of the mean target so the
    # first predictions land on the right scale.  Targets far below
    # softplus(0) would otherwise drive the readout deep into the flat
    # negative tail, where gradients are too small to climb back out
    # within the epoch budget.
    mean_target = float(np.clip(np.mean(targets), 1e-12, 50.0))
    state.predictor["readout_bias"][0] = float(np.log(np.expm1(mean_target)))
    state0 = LstmState.zeros(cfg.hidden_dim)
    best = np.inf
    since_best = 0
    epochs_run = 0
    for epoch in range(cfg.warmup_epochs):
        er = rng.child(f"epoch{epoch}")
        packed = [_epoch_frame(s, O, t, cfg, er.child(f"frame{k}"))
                  for k, (s, O, t) in
                  enumerate(zip(frames, embeddings, targets))]
        _, _, g_ext, g_pred, g_dec = window_grad(
            packed, state.extractor, state.predictor, state.decoder,
            cfg.lam, state0, slope=cfg.attention_slope)
        _apply_update(state, "extractor", g_ext)
        _apply_update(state, "predictor", g_pred)
        _apply_update(state, "decoder", g_dec)
        epochs_run = epoch + 1
        score, _ = window_eval(eval_frames, state.extractor, state.predictor,
                               state.decoder, cfg.lam, state0,
                               slope=cfg.attention_slope)
        if score < best - 1e-12:
            best = score
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    state.warmup_steps = epochs_run
    _thread_clean_pass(state, frames, embeddings)
    return state


def _require_unlabeled(s: GraphSnapshot, op: str) -> None:
    if s.labels is not None:
        raise LabelAccessError(
            f"{op} received a labeled snapshot; post-deployment frames must "
            f"be label-free")


def finetune(state: EstimatorState, s: GraphSnapshot, model, rng
             ) -> EstimatorState:
    """Post-deployment adaptation: Adam on the reconstruction objective for
    the extractor and decoder only.  The predictor is untouched and the
    snapshot must be label-free.

    As in warm-up, training views are redrawn per epoch while early
    stopping scores a single pinned evaluation view.
    """
    _require_unlabeled(s, "finetune")
    cfg = state.config
    out = state.clone()
    if cfg.finetune_epochs == 0:
        return out
    O = model.embed(s)
    ev = _epoch_frame(s, O, 0.0, cfg, rng.child("eval"))
    best = np.inf
    since_best = 0
    steps = 0
    for epoch in range(cfg.finetune_epochs):
        er = rng.child(f"epoch{epoch}")
        fr = _epoch_frame(s, O, 0.0, cfg, er)
        _, _, g_ext, g_dec = reconstruction_grad(
            fr.aug_indptr, fr.aug_indices, fr.aug_O, out.extractor,
            out.decoder, pos_pairs=fr.pos_pairs, neg_pairs=fr.neg_pairs,
            lam=cfg.lam, slope=cfg.attention_slope)
        _apply_update(out, "extractor", g_ext)
        _apply_update(out, "decoder", g_dec)
        steps = epoch + 1
        score, _ = reconstruction_eval(
            ev.aug_indptr, ev.aug_indices, ev.aug_O, out.extractor,
            out.decoder, pos_pairs=ev.pos_pairs, neg_pairs=ev.neg_pairs,
            lam=cfg.lam, slope=cfg.attention_slope)
        if score < best - 1e-12:
            best = score
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    out.finetune_steps = state.finetune_steps + steps
    return out


def predict(state: EstimatorState, s: GraphSnapshot, model
            ) -> tuple[float, EstimatorState]:
    """Loss estimate for one label-free snapshot; returns the non-negative
    prediction and the state with its recurrent memory advanced."""
    _require_unlabeled(s, "predict")
    O = model.embed(s)
    F = gat_embed(s, O, state.extractor, state.config.attention_slope)
    y, st = lstm_step(pooled_input(F), state.lstm_state, state.predictor)
    out = state.clone()
    out.lstm_state = st
    return float(softplus(y)), out


# ---------------------------------------------------------------------------
# checkpointing


def _merged_bundle(state: EstimatorState) -> ParamBundle:
    entries = []
    for name in _COMPONENTS:
        entries.extend(getattr(state, name).entries())
    entries.append(("lstm_h", "state", state.lstm_state.h))
    entries.append(("lstm_c", "state", state.lstm_state.c))
    return ParamBundle(entries)


def save_estimator(path, state: EstimatorState) -> None:
    """Text checkpoint: every parameter tensor plus the recurrent state and
    a header of the scalar hyperparameters.  Optimizer moments are not
    persisted; a loaded state resumes with fresh ones."""
    cfg = state.config
    header = {
        "lambda": format(cfg.lam, ".17g"),
        "rnn_dim": str(cfg.rnn_dim),
        "hidden_dim": str(cfg.hidden_dim),
        "pool": cfg.pool,
        "warmup_steps": str(state.warmup_steps),
        "finetune_steps": str(state.finetune_steps),
        "warmup_epochs": str(cfg.warmup_epochs),
        "finetune_epochs": str(cfg.finetune_epochs),
        "patience": str(cfg.patience),
        "lr": format(cfg.lr, ".17g"),
        "augmentation": cfg.augmentation.kind,
        "augmentation_p": format(cfg.augmentation.p, ".17g"),
        "attention_slope": format(cfg.attention_slope, ".17g"),
    }
    save_params(path, _merged_bundle(state), header)


def load_estimator(path) -> EstimatorState:
    bundle, header = load_params(path)
    try:
        cfg = EstimatorConfig(
            rnn_dim=int(header["rnn_dim"]),
            hidden_dim=int(header["hidden_dim"]),
            lam=float(header["lambda"]),
            warmup_epochs=int(header["warmup_epochs"]),
            finetune_epochs=int(header["finetune_epochs"]),
            patience=int(header["patience"]),
            lr=float(header["lr"]),
            augmentation=AugmentationSpec(header["augmentation"],
                                          float(header["augmentation_p"])),
            attention_slope=float(header["attention_slope"]),
            pool=header["pool"])
        warmup_steps = int(header["warmup_steps"])
        finetune_steps = int(header["finetune_steps"])
    except KeyError as exc:
        raise ConfigError(f"checkpoint header misses {exc}") from None
    groups: dict[str, list] = {}
    for name, component, arr in bundle.entries():
        groups.setdefault(component, []).append((name, component, arr))
    state_arrays = dict(
        (name, arr) for name, _, arr in groups.get("state", []))
    try:
        return EstimatorState(
            extractor=ParamBundle(groups["extractor"]),
            predictor=ParamBundle(groups["predictor"]),
            decoder=ParamBundle(groups["decoder"]),
            lstm_state=LstmState(h=state_arrays["lstm_h"],
                                 c=state_arrays["lstm_c"]),
            adam={}, config=cfg, warmup_steps=warmup_steps,
            finetune_steps=finetune_steps)
    except KeyError as exc:
        raise ConfigError(f"checkpoint misses component {exc}") from None
