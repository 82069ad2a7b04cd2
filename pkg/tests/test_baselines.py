"""Tests for the comparison estimators."""

import dataclasses

import numpy as np
import pytest

from evodrift.baselines import (DocFit, LinearFit, OracleConfig,
                                average_confidence, doc_fit, doc_predict,
                                linear_fit, linear_predict, supervised_oracle)
from evodrift.errors import (ConfigError, DegenerateFitError, LabelAccessError,
                             NotClassificationError)
from evodrift.estimator import (EstimatorConfig, ObservationSet, finetune,
                                full_loss, observed_loss, predict, warmup)
from evodrift.generate import (BaConfig, ba_evolve, closeness_labels,
                               gaussian_features)
from evodrift.graphs import GraphSnapshot
from evodrift.metrics import LossTrace, mape
from evodrift.pretrained import train_linear_gcn
from evodrift.rng import RngStream

from test_estimator import constant_loss_observations, snap


# ---------------------------------------------------------------------------
# linear extrapolation


def test_linear_fit_exact_line():
    fit = linear_fit([(0, 1.0), (1, 3.0), (2, 5.0), (4, 9.0)])
    assert fit.slope == pytest.approx(2.0, abs=1e-10)
    assert fit.intercept == pytest.approx(1.0, abs=1e-10)
    assert linear_predict(fit, 5.0) == pytest.approx(11.0, abs=1e-9)


def test_linear_fit_constant_losses():
    fit = linear_fit([(0, 0.7), (1, 0.7), (2, 0.7)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    for t in (0.0, 10.0, 100.0):
        assert linear_predict(fit, t) == pytest.approx(0.7, rel=1e-12)


def test_linear_fit_normal_equations_oracle():
    # independent least-squares route: solve the 2x2 normal equations
    rng = RngStream(5, "ols")
    t = np.arange(6, dtype=np.float64)
    y = 0.3 * t + 1.2 + 0.1 * rng.normal(size=6)
    A = np.stack([t, np.ones_like(t)], axis=1)
    slope_ref, intercept_ref = np.linalg.solve(A.T @ A, A.T @ y)
    fit = linear_fit(list(zip(t, y)))
    assert fit.slope == pytest.approx(slope_ref, rel=1e-10)
    assert fit.intercept == pytest.approx(intercept_ref, rel=1e-10)


def test_linear_fit_degenerate_inputs():
    with pytest.raises(DegenerateFitError):
        linear_fit([(1, 2.0)])
    with pytest.raises(DegenerateFitError):
        linear_fit([(3, 1.0), (3, 2.0), (3, 3.0)])


def test_linear_predict_clamps_at_zero():
    fit = LinearFit(slope=-1.0, intercept=1.0)
    assert linear_predict(fit, 0.5) == 0.5
    assert linear_predict(fit, 5.0) == 0.0


# ---------------------------------------------------------------------------
# confidence-difference regression


class StubClassifier:
    """Frozen classifier returning preset logits per frame time."""

    task = "classification"

    def __init__(self, logits_by_time):
        self.logits_by_time = logits_by_time

    def predict(self, s):
        return self.logits_by_time[s.time_index]

    def embed(self, s):
        return self.logits_by_time[s.time_index]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _doc_frame(time, loss, conf, n=10):
    """One classification frame whose observed loss and whole-graph average
    confidence are exactly the requested values.

    The two masked nodes carry logit margins chosen to hit the loss; the
    remaining nodes share one margin chosen to hit the confidence.
    """
    assert 0.0 < loss < np.log(2.0)
    a = -np.log(np.expm1(loss))
    rest = (n * conf - 2.0 * _sigmoid(a)) / (n - 2)
    assert 0.5 < rest < 1.0
    c = np.log(rest / (1.0 - rest))
    logits = np.zeros((n, 2))
    logits[0] = [a, 0.0]
    logits[1, 1] = a
    logits[2:, 0] = c
    labels = np.zeros(n, dtype=np.int64)
    labels[1] = 1
    edges = [[i, i + 1] for i in range(n - 1)]
    s = snap(n, edges, np.eye(n), labels=labels, mask=[0, 1], t=time)
    return s, logits


def doc_observations(losses, confs):
    frames, logit_map = [], {}
    for k, (lv, cv) in enumerate(zip(losses, confs)):
        s, logits = _doc_frame(k, lv, cv)
        frames.append(s)
        logit_map[k] = logits
    model = StubClassifier(logit_map)
    return ObservationSet(frames=tuple(frames), model=model,
                          task="classification"), model


def test_average_confidence_hand_value():
    obs, model = doc_observations([0.4], [0.9])
    assert average_confidence(model, obs.frames[0]) == pytest.approx(
        0.9, rel=1e-12)


def test_average_confidence_rejects_regression_outputs():
    s = snap(2, [[0, 1]], np.eye(2))
    model = train_linear_gcn(snap(2, [[0, 1]], np.eye(2),
                                  labels=[1.0, 2.0], mask=[0, 1]))
    with pytest.raises(NotClassificationError):
        average_confidence(model, s)


def test_doc_fit_slope_two_recovered_and_exact_on_held_out():
    # losses move exactly twice as fast as confidences
    ac0, l0 = 0.90, 0.30
    acs = [ac0, 0.88, 0.85, 0.93]
    losses = [l0 + 2.0 * (ac - ac0) for ac in acs]
    obs, model = doc_observations(losses, acs)
    fit = doc_fit(obs)
    assert fit.base_confidence == pytest.approx(ac0, rel=1e-12)
    assert fit.base_loss == pytest.approx(l0, rel=1e-12)
    assert fit.slope == pytest.approx(2.0, rel=1e-9)
    held_ac = 0.87
    held_s, held_logits = _doc_frame(99, l0 + 2.0 * (held_ac - ac0), held_ac)
    model.logits_by_time[99] = held_logits
    clean = dataclasses.replace(held_s, labels=None, mask=None)
    want = l0 + 2.0 * (held_ac - ac0)
    assert doc_predict(fit, model, clean) == pytest.approx(want, rel=1e-9)


def test_doc_predict_unchanged_confidence_returns_base_loss():
    obs, model = doc_observations([0.3, 0.25, 0.35], [0.9, 0.88, 0.91])
    fit = doc_fit(obs)
    s_same, logits = _doc_frame(50, 0.2, fit.base_confidence)
    model.logits_by_time[50] = logits
    clean = dataclasses.replace(s_same, labels=None, mask=None)
    assert doc_predict(fit, model, clean) == pytest.approx(fit.base_loss,
                                                           rel=1e-12)


def test_doc_fit_rejects_regression_task():
    obs, _ = constant_loss_observations(n_frames=3)
    with pytest.raises(NotClassificationError):
        doc_fit(obs)


def test_doc_predict_clamps_at_zero():
    fit = DocFit(base_confidence=0.9, base_loss=0.1, slope=100.0)
    s, logits = _doc_frame(0, 0.3, 0.8)
    model = StubClassifier({0: logits})
    assert doc_predict(fit, model, dataclasses.replace(
        s, labels=None, mask=None)) == 0.0


def test_doc_fit_constant_confidence_gives_zero_slope():
    obs, _ = doc_observations([0.3, 0.32, 0.28], [0.9, 0.9, 0.9])
    fit = doc_fit(obs)
    assert fit.slope == 0.0


# ---------------------------------------------------------------------------
# supervised oracle


def oracle_setup(n_post=4):
    obs, model = constant_loss_observations(n_frames=4, level=0.49)
    extra, _ = constant_loss_observations(n_frames=4 + n_post, level=0.49)
    post = list(extra.frames[4:])
    cfg = EstimatorConfig(rnn_dim=6, hidden_dim=8, warmup_epochs=100,
                          patience=100)
    state = warmup(obs, cfg, RngStream(77, "warmup"))
    clean = [dataclasses.replace(s, labels=None, mask=None) for s in post]
    return obs, model, state, post, clean


def test_oracle_constant_stream_within_ten_percent():
    obs, model, state, post, clean = oracle_setup()
    preds = supervised_oracle(clean, lambda k: post[k], state, obs,
                              OracleConfig(epochs=20), RngStream(3, "oracle"))
    assert len(preds) == len(clean)
    for p in preds:
        assert abs(p - 0.49) <= 0.1 * 0.49


def test_oracle_unflagged_run_denied():
    obs, model, state, post, clean = oracle_setup()

    def denied(_):
        raise LabelAccessError("label access is not flagged for this run")

    with pytest.raises(LabelAccessError):
        supervised_oracle(clean, denied, state, obs, OracleConfig(),
                          RngStream(3, "oracle"))


def test_oracle_requests_exactly_one_label_set_per_frame():
    obs, model, state, post, clean = oracle_setup()
    calls = []

    def source(k):
        calls.append(k)
        return post[k]

    supervised_oracle(clean, source, state, obs, OracleConfig(epochs=2),
                      RngStream(3, "oracle"))
    assert calls == list(range(len(clean)))


def test_oracle_config_validation():
    with pytest.raises(ConfigError):
        OracleConfig(window=1)
    with pytest.raises(ConfigError):
        OracleConfig(epochs=0)


def test_oracle_leaves_input_state_untouched():
    obs, model, state, post, clean = oracle_setup(n_post=2)
    flat_before = state.predictor.flatten()
    supervised_oracle(clean, lambda k: post[k], state, obs,
                      OracleConfig(epochs=3), RngStream(3, "oracle"))
    assert np.array_equal(state.predictor.flatten(), flat_before)


def _mini_run(seed):
    """Small growing-graph pipeline: frozen regression model, warm-up on
    observed losses, then self-supervised tracking vs the label-buying
    oracle on the same test frames."""
    rng = RngStream(seed, "mini")
    horizon = 9
    g = ba_evolve(BaConfig(n0=18, m=2, horizon=horizon), rng.child("graph"))
    g = gaussian_features(g, 4, rng.child("features"))
    frames = []
    for s in g.snapshots:
        labels = closeness_labels(s)
        k = max(2, int(np.ceil(0.3 * s.n)))
        mask = rng.child(f"mask{s.time_index}").choice_without_replacement(
            s.n, k)
        frames.append(dataclasses.replace(s, labels=labels, mask=mask))
    model = train_linear_gcn(frames[0])
    t_deploy = 3
    obs = ObservationSet(frames=tuple(frames[: t_deploy + 1]), model=model,
                         task="regression")
    cfg = EstimatorConfig(rnn_dim=6, hidden_dim=8, warmup_epochs=200,
                          finetune_epochs=15, patience=20)
    state = warmup(obs, cfg, rng.child("warmup"))

    post = frames[t_deploy + 1:]
    clean = [dataclasses.replace(s, labels=None, mask=None) for s in post]
    actual = [full_loss(model.predict(s), s, "regression") for s in post]

    smart_preds = []
    st = state
    for k, s in enumerate(clean):
        st = finetune(st, s, model, rng.child(f"tune{k}"))
        p, st = predict(st, s, model)
        smart_preds.append(p)

    oracle_preds = supervised_oracle(
        clean, lambda k: post[k], state, obs, OracleConfig(epochs=30),
        rng.child("oracle"))
    smart_mape = mape(LossTrace(smart_preds, actual))
    oracle_mape = mape(LossTrace(oracle_preds, actual))
    return smart_mape, oracle_mape


def test_oracle_tracks_at_least_as_well_as_self_supervised_mostly():
    wins = 0
    trials = 20
    for seed in range(trials):
        smart_mape, oracle_mape = _mini_run(400 + seed)
        if oracle_mape <= smart_mape:
            wins += 1
    assert wins >= 0.7 * trials
