"""Experiment orchestration.

One run generates (or loads) an evolving graph, freezes a model trained on
frame 0, watches its observed loss over a short labeled warm-up window,
then walks the remaining frames label-free: the self-supervised estimator
fine-tunes and predicts, the baselines extrapolate, and the harness scores
everything against ground truth it obtains through an audited label vault.

Post-deployment labels only ever move through :class:`LabelVault`, which
records every access with its purpose.  The estimator receives snapshots
with labels stripped, so a violation is structurally impossible on that
path; the supervised oracle's label gate raises unless the run is
explicitly flagged.
"""

from __future__ import annotations

import math
import os
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines as bl
from .config import ExperimentConfig
from .errors import ConfigError, DegenerateFitError, LabelAccessError, \
    TooFewSamplesError
from .estimator import ObservationSet, full_loss, observed_loss, predict, \
    finetune, warmup
from .generate import closeness_labels, degree_histogram, gaussian_features, \
    power_labels, ba_evolve, dual_ba_evolve
from .graphs import EvolvingGraph, GraphSnapshot, load_sequence, normalize, \
    _parse_labels
from .metrics import LossTrace, mape, rmse, mae, standard_error
from .pretrained import train_gcn_classifier, train_linear_gcn
from .rng import RngStream
from .theory import GraphErrorInputs, estimate_alpha, fit_linear_gcn, \
    graph_relative_error, distortion_lower_bound, empirical_distortion, \
    leaky_gcn_params

__all__ = [
    "LabelVault",
    "RunReport",
    "run_experiment",
    "multi_seed",
    "theory_curve",
    "distortion_curve",
    "worker_count",
]

METHOD_ORDER = ("smart", "linear", "doc", "supervised")

TRACE_HEADER = "tau,actual,smart,linear,doc,supervised,theorem2"
SUMMARY_HEADER = "method,mape,rmse,mae,se,seeds"


def _fmt(x) -> str:
    """17-significant-digit decimal, the report-wide float format."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# the label vault


class LabelVault:
    """Single doorway to labels once the deployment boundary is crossed.

    Frames up to ``t_deploy`` are historical: their labels flow freely (the
    backbone and the warm-up window are trained on them).  For later frames
    every label read goes through :meth:`scoring_labels` or
    :meth:`oracle_frame` and lands in the audit trail; oracle access
    additionally requires the ``oracle_flagged`` bit, and a denied request
    is recorded as a violation before the run aborts.
    """

    def __init__(self, frames, label_getter, t_deploy: int,
                 oracle_flagged: bool):
        self.frames = list(frames)
        self._labels = label_getter
        self._cache: dict[int, np.ndarray] = {}
        self.t_deploy = int(t_deploy)
        self.oracle_flagged = bool(oracle_flagged)
        self.accesses: list[dict] = []
        self.violations: list[dict] = []

    def __len__(self):
        return len(self.frames)

    def _label_array(self, k: int) -> np.ndarray:
        if k not in self._cache:
            self._cache[k] = np.asarray(self._labels(k))
        return self._cache[k]

    @staticmethod
    def _masked_only(labels: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Labels materialized at the mask only; the rest is a sentinel the
        loss paths never read."""
        if np.issubdtype(labels.dtype, np.integer):
            out = np.full(labels.shape, -1, dtype=labels.dtype)
        else:
            out = np.full(labels.shape, np.nan)
        out[mask] = labels[mask]
        return out

    # -- pre-deployment frames --------------------------------------------

    def pretrain_frame(self, mask: np.ndarray) -> GraphSnapshot:
        labels = self._label_array(0)
        return self.frames[0].replace(labels=self._masked_only(labels, mask),
                                      mask=mask)

    def warm_frame(self, k: int, mask: np.ndarray) -> GraphSnapshot:
        if not 1 <= k <= self.t_deploy:
            raise ConfigError(f"frame {k} is not in the warm-up window")
        labels = self._label_array(k)
        return self.frames[k].replace(labels=self._masked_only(labels, mask),
                                      mask=mask)

    def historical_labels(self, k: int) -> np.ndarray:
        """Full labels of a pre-deployment frame (theory diagnostics)."""
        if k > self.t_deploy:
            raise ConfigError(f"frame {k} lies past the deployment boundary")
        return self._label_array(k)

    # -- post-deployment frames ---------------------------------------------

    def test_frame(self, k: int) -> GraphSnapshot:
        """Label-free view; what the estimator is allowed to see."""
        return self.frames[k].replace(labels=None, mask=None)

    def scoring_labels(self, k: int) -> np.ndarray:
        self.accesses.append({"frame": int(k), "purpose": "scoring"})
        return self._label_array(k)

    def oracle_frame(self, k: int, mask: np.ndarray) -> GraphSnapshot:
        if not self.oracle_flagged:
            self.violations.append({"frame": int(k), "purpose": "oracle",
                                    "denied": True})
            raise LabelAccessError(
                f"supervised label access to frame {k} requires the "
                "oracle flag")
        self.accesses.append({"frame": int(k), "purpose": "oracle"})
        labels = self._label_array(k)
        return self.frames[k].replace(labels=self._masked_only(labels, mask),
                                      mask=mask)

    def audit_report(self) -> dict:
        return {
            "t_deploy": self.t_deploy,
            "oracle_flagged": self.oracle_flagged,
            "post_deployment_accesses": list(self.accesses),
            "violations": list(self.violations),
        }


# ---------------------------------------------------------------------------
# data preparation


def _load_structure(cfg: ExperimentConfig, rng: RngStream):
    """Snapshots without labels, plus the vault's label getter."""
    if cfg.data.kind == "directory":
        bare = load_sequence(cfg.data.path, with_labels=False)
        labeled_dir = cfg.data.path

        def getter(k):
            # Label files are opened lazily, at the moment of an audited
            # access, never during the structural load above.
            path = os.path.join(labeled_dir, f"t{k}.labels")
            if not os.path.exists(path):
                raise FileNotFoundError(f"frame {k} has no label file: {path}")
            return _parse_labels(path)

        return list(bare.snapshots), getter

    gen_cfg = cfg.data.generator_config()
    if cfg.data.kind == "ba":
        g = ba_evolve(gen_cfg, rng.child("graph-gen"))
    else:
        g = dual_ba_evolve(gen_cfg, rng.child("graph-gen"))
    g = gaussian_features(g, cfg.data.feature_dim, rng.child("features"))
    frames = list(g.snapshots)

    if cfg.labels.kind == "closeness":
        def getter(k):
            return closeness_labels(frames[k])
    else:
        alpha, col = cfg.labels.alpha, cfg.labels.col

        def getter(k):
            return power_labels(frames[k], alpha, col)

    return frames, getter


def _fraction_mask(n: int, fraction: float, rng: RngStream) -> np.ndarray:
    count = max(1, math.ceil(fraction * n))
    return rng.choice_without_replacement(n, count)


def _arrival_mask(prev_n: int, cur_n: int, fraction: float,
                  rng: RngStream) -> np.ndarray:
    """Fraction of the newly-arrived nodes, ceiling-rounded; falls back to a
    fraction of all nodes when the frame brought no arrivals."""
    newly = cur_n - prev_n
    if newly <= 0:
        return _fraction_mask(cur_n, fraction, rng)
    count = math.ceil(fraction * newly)
    return prev_n + rng.choice_without_replacement(newly, count)


def _pretrain_model(cfg: ExperimentConfig, frame0: GraphSnapshot,
                    rng: RngStream):
    if cfg.pretrain.backbone == "linear_gcn":
        return train_linear_gcn(frame0)
    return train_gcn_classifier(
        frame0, cfg.pretrain.n_classes, rng,
        hidden=cfg.pretrain.hidden, layers=cfg.pretrain.layers,
        epochs=cfg.pretrain.epochs, lr=cfg.pretrain.lr)


def _theorem_alpha(cfg: ExperimentConfig, vault: LabelVault) -> float | None:
    """Exponent fed to the closed-form error curve.

    Power labels carry their exponent; for other label models the last
    warm-up frame (historical, so labels are fair game) provides a
    log-log surrogate fit.  Returns None when no sensible exponent exists.
    """
    if cfg.labels.kind == "power":
        return cfg.labels.alpha
    if cfg.task != "regression":
        return None
    k = vault.t_deploy
    frame = vault.frames[k]
    try:
        return estimate_alpha(frame.degrees, vault.historical_labels(k))
    except DegenerateFitError:
        return None


# ---------------------------------------------------------------------------
# the run itself


@dataclass
class RunReport:
    """Everything one seeded run produced, before and after serialization."""

    config: dict
    seed: int
    taus: list[int]
    actual: list[float]
    predictions: dict[str, list[float]]
    theorem2: list[float]
    summary: list[dict]
    audit: dict
    out_dir: str | None = None
    observed: list[float] = field(default_factory=list)

    def trace_rows(self) -> list[str]:
        rows = []
        for i, tau in enumerate(self.taus):
            cells = [str(tau), _fmt(self.actual[i])]
            for method in METHOD_ORDER:
                trace = self.predictions.get(method)
                cells.append(_fmt(trace[i]) if trace is not None
                             else "nan")
            cells.append(_fmt(self.theorem2[i]))
            rows.append(",".join(cells))
        return rows

    def summary_rows(self) -> list[str]:
        return [",".join([row["method"], _fmt(row["mape"]), _fmt(row["rmse"]),
                          _fmt(row["mae"]), _fmt(row["se"]),
                          str(row["seeds"])])
                for row in self.summary]


def _summarize(predictions: dict, actual, seeds: int = 1) -> list[dict]:
    rows = []
    actual_arr = np.asarray(actual)
    for method in METHOD_ORDER:
        trace = predictions.get(method)
        if trace is None:
            continue
        lt = LossTrace(predicted=np.asarray(trace), actual=actual_arr)
        rows.append({"method": method, "mape": mape(lt), "rmse": rmse(lt),
                     "mae": mae(lt), "se": float("nan"), "seeds": seeds})
    return rows


def build_vault(cfg: ExperimentConfig, seed: int) -> tuple[LabelVault,
                                                           RngStream]:
    """Generate or load the sequence and wrap it in an audited vault."""
    root = RngStream(seed, "run")
    frames, getter = _load_structure(cfg, root)
    if len(frames) <= cfg.t_deploy + 1:
        raise ConfigError(
            f"sequence has {len(frames)} frames but t_deploy="
            f"{cfg.t_deploy} leaves no test frame")
    vault = LabelVault(frames, getter, cfg.t_deploy,
                       oracle_flagged=cfg.baselines.supervised)
    return vault, root


def run_experiment(cfg: ExperimentConfig, seed: int | None = None,
                   out_dir=None) -> RunReport:
    """Execute one seeded experiment and (optionally) write its reports.

    Report files land in ``out_dir``: trace.csv, summary.csv,
    config.echo.json, and label_audit.json.  A failure removes whatever
    was already written so a crashed run never leaves a partial bundle.
    """
    seed = cfg.seed if seed is None else int(seed)
    vault, root = build_vault(cfg, seed)
    masks = root.child("masks")
    init = root.child("init")
    aug = root.child("augmentation")
    frames = vault.frames
    t_deploy = cfg.t_deploy
    test_range = range(t_deploy + 1, len(frames))

    # (1) frozen backbone on frame 0
    mask0 = _fraction_mask(frames[0].n, cfg.label_fraction,
                           masks.child("pretrain"))
    frame0 = vault.pretrain_frame(mask0)
    model = _pretrain_model(cfg, frame0, init.child("backbone"))

    # (2) labeled warm-up window and its observed losses.  The observation
    # set spans every pre-deployment frame, so the pretraining frame (with
    # its much larger mask) opens the window and anchors the loss scale;
    # the later frames contribute the noisy newly-arrived observations.
    warm_frames = [frame0]
    observed = [observed_loss(model.predict(frame0), frame0, cfg.task)]
    for k in range(1, t_deploy + 1):
        mask = _arrival_mask(frames[k - 1].n, frames[k].n, cfg.label_fraction,
                             masks.child(f"warm{k}"))
        frame = vault.warm_frame(k, mask)
        warm_frames.append(frame)
        observed.append(observed_loss(model.predict(frame), frame, cfg.task))
    observations = ObservationSet(frames=tuple(warm_frames), model=model,
                                  task=cfg.task)

    # (3) estimator warm-up
    state = warmup(observations, cfg.estimator, init.child("estimator"))

    # (4) baselines that only need the warm-up window
    predictions: dict[str, list[float]] = {}
    if cfg.baselines.linear:
        # The extrapolation baseline sees the newly-arrived observations
        # only, matching its published description.
        fit = bl.linear_fit([(k, observed[k])
                             for k in range(1, t_deploy + 1)])
        predictions["linear"] = [bl.linear_predict(fit, k)
                                 for k in test_range]
    if cfg.baselines.doc:
        fit = bl.doc_fit(observations)
        predictions["doc"] = [bl.doc_predict(fit, model, vault.test_frame(k))
                              for k in test_range]

    # (5) supervised oracle, behind the vault's flag
    test_frames = [vault.test_frame(k) for k in test_range]
    if cfg.baselines.supervised:
        def label_source(idx):
            k = t_deploy + 1 + idx
            mask = _arrival_mask(frames[k - 1].n, frames[k].n,
                                 cfg.label_fraction,
                                 masks.child(f"oracle{k}"))
            return vault.oracle_frame(k, mask)

        predictions["supervised"] = bl.supervised_oracle(
            test_frames, label_source, state, observations, cfg.oracle,
            aug.child("oracle"))

    # (6) the self-supervised walk over the test horizon
    smart = []
    st = state
    for idx, k in enumerate(test_range):
        s = test_frames[idx]
        st = finetune(st, s, model, aug.child(f"frame{k}"))
        pred, st = predict(st, s, model)
        smart.append(pred)
    predictions["smart"] = smart

    # (7) ground truth through the audited scoring door
    actual = []
    for idx, k in enumerate(test_range):
        scored = test_frames[idx].replace(labels=vault.scoring_labels(k))
        actual.append(full_loss(model.predict(scored), scored, cfg.task))

    # (8) closed-form curve (single-m growth only)
    theorem2 = [float("nan")] * len(test_frames)
    if cfg.data.kind == "ba":
        alpha = _theorem_alpha(cfg, vault)
        if alpha is not None:
            theorem2 = [graph_relative_error(GraphErrorInputs(
                m=cfg.data.m, n0=cfg.data.n0, t=k, alpha=alpha,
                hist=degree_histogram(frames[k]))) for k in test_range]

    report = RunReport(
        config=cfg.to_dict() | {"seed": seed},
        seed=seed,
        taus=[k - t_deploy for k in test_range],
        actual=actual,
        predictions=predictions,
        theorem2=theorem2,
        summary=_summarize(predictions, actual),
        audit=vault.audit_report(),
        out_dir=os.fspath(out_dir) if out_dir is not None else None,
        observed=observed)
    if out_dir is not None:
        _write_report(report)
    return report


# ---------------------------------------------------------------------------
# serialization


def _write_files(out_dir: str, files: dict[str, str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = os.path.join(out_dir, name)
            written.append(path)
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
    except BaseException:
        for path in written:
            if os.path.exists(path):
                os.remove(path)
        raise


def _write_report(report: RunReport) -> None:
    trace = "\n".join([TRACE_HEADER] + report.trace_rows()) + "\n"
    summary = "\n".join([SUMMARY_HEADER] + report.summary_rows()) + "\n"
    echo = json.dumps(report.config, sort_keys=True, indent=2) + "\n"
    audit = json.dumps(report.audit, sort_keys=True, indent=2) + "\n"
    _write_files(report.out_dir, {
        "trace.csv": trace,
        "summary.csv": summary,
        "config.echo.json": echo,
        "label_audit.json": audit,
    })


# ---------------------------------------------------------------------------
# multi-seed aggregation


def worker_count() -> int:
    """Thread cap: EVOGRAPH_THREADS when set, hardware default otherwise."""
    raw = os.environ.get("EVOGRAPH_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"EVOGRAPH_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError("EVOGRAPH_THREADS must be at least 1")
    return value


def multi_seed(cfg: ExperimentConfig, seeds, out_dir=None
               ) -> tuple[list[dict], list[RunReport]]:
    """Run per-seed experiments (threads capped by EVOGRAPH_THREADS) and
    aggregate their metrics: means across seeds, with the across-seed
    standard error of the percentage error in the ``se`` column."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise TooFewSamplesError("multi_seed needs at least two seeds")

    def one(seed):
        sub = None if out_dir is None else os.path.join(
            os.fspath(out_dir), f"seed{seed}")
        return run_experiment(cfg, seed=seed, out_dir=sub)

    workers = min(worker_count(), len(seeds))
    if workers == 1:
        reports = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, seeds))

    methods = [m for m in METHOD_ORDER if m in reports[0].predictions]
    rows = []
    for method in methods:
        per_seed = {metric: [] for metric in ("mape", "rmse", "mae")}
        for rep in reports:
            row = next(r for r in rep.summary if r["method"] == method)
            for metric in per_seed:
                per_seed[metric].append(row[metric])
        rows.append({
            "method": method,
            "mape": float(np.mean(per_seed["mape"])),
            "rmse": float(np.mean(per_seed["rmse"])),
            "mae": float(np.mean(per_seed["mae"])),
            "se": standard_error(per_seed["mape"]),
            "seeds": len(seeds),
        })

    if out_dir is not None:
        lines = [SUMMARY_HEADER]
        for row in rows:
            lines.append(",".join([row["method"], _fmt(row["mape"]),
                                   _fmt(row["rmse"]), _fmt(row["mae"]),
                                   _fmt(row["se"]), str(row["seeds"])]))
        echo = json.dumps(cfg.to_dict() | {"seeds": seeds}, sort_keys=True,
                          indent=2) + "\n"
        _write_files(os.fspath(out_dir), {
            "summary.csv": "\n".join(lines) + "\n",
            "config.echo.json": echo,
        })
    return rows, reports


# ---------------------------------------------------------------------------
# theory diagnostics (the theory-curve and distortion subcommands)


THEORY_CURVE_DRAWS = 32


def theory_curve(cfg: ExperimentConfig, seed: int | None = None
                 ) -> list[tuple[int, float, float, float]]:
    """Closed-form error curve next to a Monte-Carlo replica of its setting,
    one row (tau, bound, estimate, se) per test frame.

    The closed form describes a degree-power label model with zero-mean
    labels, so the realized column rebuilds that world on the run's actual
    structure: per draw, fresh unit-normal features, labels
    degree**alpha * feature column, a full-label least-squares fit on frame
    0, and the graph-level squared error of that frozen fit on each later
    frame normalized by the label second moment.  A closeness run donates
    its exponent through the log-log surrogate fit at the deployment frame;
    power runs use their configured exponent directly.
    """
    if cfg.data.kind != "ba":
        raise ConfigError("the closed-form curve assumes single-m growth")
    if cfg.pretrain.backbone != "linear_gcn":
        raise ConfigError("the closed-form curve describes the linear model")
    seed = cfg.seed if seed is None else int(seed)
    vault, root = build_vault(cfg, seed)
    frames = vault.frames
    alpha = _theorem_alpha(cfg, vault)
    if alpha is None:
        raise ConfigError(
            "no label exponent available for the closed-form curve")
    col = cfg.labels.col
    mc = root.child("theory-mc")
    operators = [normalize(s) for s in frames]
    test = range(cfg.t_deploy + 1, len(frames))
    ratios = np.empty((THEORY_CURVE_DRAWS, len(test)))
    final_n = frames[-1].n
    for j in range(THEORY_CURVE_DRAWS):
        X = mc.child(f"draw{j}").normal(size=(final_n, cfg.data.feature_dim))
        s0 = frames[0]
        y0 = s0.degrees.astype(np.float64) ** alpha * X[:s0.n, col]
        w = fit_linear_gcn(operators[0], X[:s0.n], y0)
        for i, k in enumerate(test):
            sk = frames[k]
            yk = sk.degrees.astype(np.float64) ** alpha * X[:sk.n, col]
            pred = operators[k].dot(X[:sk.n]) @ w
            ratios[j, i] = np.sum((pred - yk) ** 2) / np.sum(yk * yk)
    rows = []
    for i, k in enumerate(test):
        bound = graph_relative_error(
            GraphErrorInputs(m=cfg.data.m, n0=cfg.data.n0, t=k, alpha=alpha,
                             hist=degree_histogram(frames[k])))
        rows.append((k - cfg.t_deploy, bound, float(np.mean(ratios[:, i])),
                     standard_error(ratios[:, i])))
    return rows


def distortion_curve(cfg: ExperimentConfig, seed: int | None = None
                     ) -> list[tuple[int, float, float, float]]:
    """Closed-form distortion lower bound vs its Monte-Carlo estimate for
    one tracked node, one row (tau, bound, estimate, se) per step."""
    if cfg.data.kind == "directory":
        raise ConfigError("distortion tracking needs a generated sequence")
    seed = cfg.seed if seed is None else int(seed)
    root = RngStream(seed, "run")
    frames, _ = _load_structure(cfg, root)
    g = EvolvingGraph(tuple(frames))
    spec = cfg.distortion
    dcfg = spec.theory_config()
    if spec.max_tau >= len(g):
        raise ConfigError(f"max_tau {spec.max_tau} exceeds the horizon")
    perturb = root.child("perturbation")
    theta = leaky_gcn_params(dcfg.width, g.feature_dim,
                             perturb.child("params"))
    rows = []
    for tau in range(1, spec.max_tau + 1):
        bound = distortion_lower_bound(g, dcfg, spec.node, tau)
        est = empirical_distortion(g, theta, dcfg, spec.node, tau,
                                   perturb.child(f"tau{tau}"))
        rows.append((tau, bound, est.mean, est.se))
    return rows
