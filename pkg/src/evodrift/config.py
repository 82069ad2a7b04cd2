"""Experiment configuration.

Configs arrive as JSON whose keys mirror the dataclass fields in snake_case.
Parsing is strict: an unknown key anywhere in the tree is a hard error, so a
typo can never silently fall back to a default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .estimator import EstimatorConfig
from .baselines import OracleConfig
from .graphs import AugmentationSpec
from .generate import BaConfig, DualBaConfig
from .theory import DistortionConfig

__all__ = [
    "DataSpec",
    "LabelSpec",
    "PretrainSpec",
    "BaselineToggles",
    "DistortionSpec",
    "ExperimentConfig",
    "load_config",
]

_REQUIRED = object()


class _Section:
    """One level of the JSON tree; tracks consumed keys and rejects leftovers."""

    def __init__(self, raw: dict, where: str):
        if not isinstance(raw, dict):
            raise ConfigError(f"{where} must be a JSON object, got {raw!r}")
        self.raw = dict(raw)
        self.where = where

    def take(self, key, default=_REQUIRED):
        if key in self.raw:
            return self.raw.pop(key)
        if default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} in {self.where}")
        return default

    def subsection(self, key, default=_REQUIRED):
        raw = self.take(key, default)
        if raw is default and default is not _REQUIRED:
            return None
        return _Section(raw, f"{self.where}.{key}")

    def finish(self):
        if self.raw:
            extras = ", ".join(sorted(self.raw))
            raise ConfigError(f"unknown keys in {self.where}: {extras}")


def _as_int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _as_number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _as_bool(value, where):
    if not isinstance(value, bool):
        raise ConfigError(f"{where} must be true or false, got {value!r}")
    return value


def _as_str(value, where):
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


@dataclass(frozen=True)
class DataSpec:
    """Where snapshots come from: a growth model or a saved directory."""

    kind: str
    n0: int = 0
    m: int = 0
    m1: int = 0
    m2: int = 0
    p: float = 0.5
    horizon: int = 0
    feature_dim: int = 8
    seed_graph: str = "ring"
    path: str = ""

    def __post_init__(self):
        if self.kind not in ("ba", "dual_ba", "directory"):
            raise ConfigError(f"unknown data kind {self.kind!r}")
        if self.kind == "directory":
            if not self.path:
                raise ConfigError("directory data needs a path")
            return
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be positive")
        # Growth parameters are validated by the generator configs.
        self.generator_config()

    def generator_config(self):
        if self.kind == "ba":
            return BaConfig(n0=self.n0, m=self.m, horizon=self.horizon,
                            seed_graph=self.seed_graph)
        if self.kind == "dual_ba":
            return DualBaConfig(n0=self.n0, m1=self.m1, m2=self.m2,
                                p=self.p, horizon=self.horizon,
                                seed_graph=self.seed_graph)
        raise ConfigError("directory data has no generator")

    @staticmethod
    def from_section(sec: _Section) -> "DataSpec":
        kind = _as_str(sec.take("kind"), f"{sec.where}.kind")
        if kind == "directory":
            spec = DataSpec(kind=kind,
                            path=_as_str(sec.take("path"), f"{sec.where}.path"))
        elif kind == "ba":
            spec = DataSpec(
                kind=kind,
                n0=_as_int(sec.take("n0"), f"{sec.where}.n0"),
                m=_as_int(sec.take("m"), f"{sec.where}.m"),
                horizon=_as_int(sec.take("horizon"), f"{sec.where}.horizon"),
                feature_dim=_as_int(sec.take("feature_dim", 8),
                                    f"{sec.where}.feature_dim"),
                seed_graph=_as_str(sec.take("seed_graph", "ring"),
                                   f"{sec.where}.seed_graph"))
        elif kind == "dual_ba":
            spec = DataSpec(
                kind=kind,
                n0=_as_int(sec.take("n0"), f"{sec.where}.n0"),
                m1=_as_int(sec.take("m1"), f"{sec.where}.m1"),
                m2=_as_int(sec.take("m2"), f"{sec.where}.m2"),
                p=_as_number(sec.take("p", 0.5), f"{sec.where}.p"),
                horizon=_as_int(sec.take("horizon"), f"{sec.where}.horizon"),
                feature_dim=_as_int(sec.take("feature_dim", 8),
                                    f"{sec.where}.feature_dim"),
                seed_graph=_as_str(sec.take("seed_graph", "ring"),
                                   f"{sec.where}.seed_graph"))
        else:
            raise ConfigError(f"unknown data kind {kind!r}")
        sec.finish()
        return spec


@dataclass(frozen=True)
class LabelSpec:
    """Label model: closeness centrality, a degree-power of a feature
    column, or labels already present in the data files."""

    kind: str
    alpha: float = 1.0
    col: int = 0

    def __post_init__(self):
        if self.kind not in ("closeness", "power", "from_files"):
            raise ConfigError(f"unknown label kind {self.kind!r}")

    @staticmethod
    def from_section(sec: _Section) -> "LabelSpec":
        kind = _as_str(sec.take("kind"), f"{sec.where}.kind")
        if kind == "power":
            spec = LabelSpec(kind=kind,
                             alpha=_as_number(sec.take("alpha"),
                                              f"{sec.where}.alpha"),
                             col=_as_int(sec.take("col", 0),
                                         f"{sec.where}.col"))
        else:
            spec = LabelSpec(kind=kind)
        sec.finish()
        return spec


@dataclass(frozen=True)
class PretrainSpec:
    """Frozen-backbone training recipe for the initial snapshot."""

    backbone: str = "linear_gcn"
    layers: int = 2
    hidden: int = 16
    epochs: int = 200
    lr: float = 0.01
    n_classes: int = 0

    def __post_init__(self):
        if self.backbone not in ("linear_gcn", "gcn"):
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        if self.backbone == "gcn":
            if self.layers < 2:
                raise ConfigError("gcn backbone needs at least two layers")
            if self.n_classes < 2:
                raise ConfigError("gcn backbone needs n_classes >= 2")
            if self.hidden < 1 or self.epochs < 1 or self.lr <= 0:
                raise ConfigError("bad gcn training parameters")

    @staticmethod
    def from_section(sec: _Section | None) -> "PretrainSpec":
        if sec is None:
            return PretrainSpec()
        backbone = _as_str(sec.take("backbone", "linear_gcn"),
                           f"{sec.where}.backbone")
        spec = PretrainSpec(
            backbone=backbone,
            layers=_as_int(sec.take("layers", 2), f"{sec.where}.layers"),
            hidden=_as_int(sec.take("hidden", 16), f"{sec.where}.hidden"),
            epochs=_as_int(sec.take("epochs", 200), f"{sec.where}.epochs"),
            lr=_as_number(sec.take("lr", 0.01), f"{sec.where}.lr"),
            n_classes=_as_int(sec.take("n_classes", 0),
                              f"{sec.where}.n_classes"))
        sec.finish()
        return spec


@dataclass(frozen=True)
class BaselineToggles:
    linear: bool = True
    doc: bool = False
    supervised: bool = False

    @staticmethod
    def from_section(sec: _Section | None) -> "BaselineToggles":
        if sec is None:
            return BaselineToggles()
        toggles = BaselineToggles(
            linear=_as_bool(sec.take("linear", True), f"{sec.where}.linear"),
            doc=_as_bool(sec.take("doc", False), f"{sec.where}.doc"),
            supervised=_as_bool(sec.take("supervised", False),
                                f"{sec.where}.supervised"))
        sec.finish()
        return toggles


@dataclass(frozen=True)
class DistortionSpec:
    """Inputs of the distortion subcommand: the perturbed-model settings
    plus which node to track and how far."""

    width: int = 64
    xi: float = 0.1
    negative_slope: float = 0.2
    param_draws: int = 100_000
    node: int = 0
    max_tau: int = 10

    def __post_init__(self):
        self.theory_config()
        if self.node < 0:
            raise ConfigError("node index must be non-negative")
        if self.max_tau < 1:
            raise ConfigError("max_tau must be at least 1")

    def theory_config(self) -> DistortionConfig:
        return DistortionConfig(width=self.width, xi=self.xi,
                                negative_slope=self.negative_slope,
                                param_draws=self.param_draws)

    @staticmethod
    def from_section(sec: _Section | None) -> "DistortionSpec":
        if sec is None:
            return DistortionSpec()
        spec = DistortionSpec(
            width=_as_int(sec.take("width", 64), f"{sec.where}.width"),
            xi=_as_number(sec.take("xi", 0.1), f"{sec.where}.xi"),
            negative_slope=_as_number(sec.take("negative_slope", 0.2),
                                      f"{sec.where}.negative_slope"),
            param_draws=_as_int(sec.take("param_draws", 100_000),
                                f"{sec.where}.param_draws"),
            node=_as_int(sec.take("node", 0), f"{sec.where}.node"),
            max_tau=_as_int(sec.take("max_tau", 10), f"{sec.where}.max_tau"))
        sec.finish()
        return spec


def _estimator_from_section(sec: _Section | None) -> EstimatorConfig:
    if sec is None:
        return EstimatorConfig()
    aug_sec = sec.subsection("augmentation", None)
    if aug_sec is None:
        aug = AugmentationSpec("drop_edge", 0.2)
    else:
        aug = AugmentationSpec(
            kind=_as_str(aug_sec.take("kind"), f"{aug_sec.where}.kind"),
            p=_as_number(aug_sec.take("p"), f"{aug_sec.where}.p"))
        aug_sec.finish()
    cfg = EstimatorConfig(
        rnn_dim=_as_int(sec.take("rnn_dim", 16), f"{sec.where}.rnn_dim"),
        hidden_dim=_as_int(sec.take("hidden_dim", 16),
                           f"{sec.where}.hidden_dim"),
        lam=_as_number(sec.take("lam", 0.5), f"{sec.where}.lam"),
        warmup_epochs=_as_int(sec.take("warmup_epochs", 200),
                              f"{sec.where}.warmup_epochs"),
        finetune_epochs=_as_int(sec.take("finetune_epochs", 100),
                                f"{sec.where}.finetune_epochs"),
        patience=_as_int(sec.take("patience", 20), f"{sec.where}.patience"),
        lr=_as_number(sec.take("lr", 0.01), f"{sec.where}.lr"),
        augmentation=aug,
        attention_slope=_as_number(sec.take("attention_slope", 0.2),
                                   f"{sec.where}.attention_slope"),
        pool=_as_str(sec.take("pool", "mean"), f"{sec.where}.pool"))
    sec.finish()
    return cfg


def _oracle_from_section(sec: _Section | None) -> OracleConfig:
    if sec is None:
        return OracleConfig()
    cfg = OracleConfig(
        window=_as_int(sec.take("window", 6), f"{sec.where}.window"),
        epochs=_as_int(sec.take("epochs", 30), f"{sec.where}.epochs"),
        patience=_as_int(sec.take("patience", 10), f"{sec.where}.patience"))
    sec.finish()
    return cfg


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs apart from the output directory."""

    data: DataSpec
    labels: LabelSpec
    task: str = "regression"
    t_deploy: int = -1  # -1 means the per-track default (9 generated, 3 files)
    label_fraction: float = 0.10
    pretrain: PretrainSpec = field(default_factory=PretrainSpec)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    baselines: BaselineToggles = field(default_factory=BaselineToggles)
    distortion: DistortionSpec = field(default_factory=DistortionSpec)
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.t_deploy == -1:
            default = 9 if self.data.kind in ("ba", "dual_ba") else 3
            object.__setattr__(self, "t_deploy", default)
        if self.t_deploy < 2:
            raise ConfigError("t_deploy must be at least 2 (the baselines "
                              "need two observed points)")
        if not 0.0 < self.label_fraction <= 1.0:
            raise ConfigError("label_fraction must lie in (0, 1]")
        if self.data.kind == "directory":
            if self.labels.kind != "from_files":
                raise ConfigError("directory data carries its own labels; "
                                  "use label kind 'from_files'")
        elif self.labels.kind == "from_files":
            raise ConfigError("generated data needs an explicit label model")
        if self.task == "regression":
            if self.pretrain.backbone != "linear_gcn":
                raise ConfigError("regression uses the linear_gcn backbone")
            if self.baselines.doc:
                raise ConfigError("the confidence baseline needs a "
                                  "classification task")
        else:
            if self.pretrain.backbone != "gcn":
                raise ConfigError("classification uses the gcn backbone")
            if self.labels.kind in ("closeness", "power"):
                raise ConfigError("closeness and power labels are "
                                  "regression targets")
        if self.data.kind in ("ba", "dual_ba"):
            if self.data.horizon <= self.t_deploy:
                raise ConfigError("horizon must exceed t_deploy so at least "
                                  "one test frame exists")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        sec = _Section(raw, "config")
        data = DataSpec.from_section(sec.subsection("data"))
        default_labels = {"kind": "from_files"} \
            if data.kind == "directory" else {"kind": "closeness"}
        labels = LabelSpec.from_section(
            sec.subsection("labels", default_labels))
        cfg = ExperimentConfig(
            data=data,
            labels=labels,
            task=_as_str(sec.take("task", "regression"), "config.task"),
            t_deploy=_as_int(sec.take("t_deploy", -1), "config.t_deploy"),
            label_fraction=_as_number(sec.take("label_fraction", 0.10),
                                      "config.label_fraction"),
            pretrain=PretrainSpec.from_section(sec.subsection("pretrain",
                                                              None)),
            estimator=_estimator_from_section(sec.subsection("estimator",
                                                             None)),
            oracle=_oracle_from_section(sec.subsection("oracle", None)),
            baselines=BaselineToggles.from_section(sec.subsection("baselines",
                                                                  None)),
            distortion=DistortionSpec.from_section(sec.subsection("distortion",
                                                                  None)),
            seed=_as_int(sec.take("seed", 0), "config.seed"))
        sec.finish()
        return cfg

    def to_dict(self) -> dict:
        """Fully resolved, JSON-ready form (what config.echo.json records)."""
        data = {"kind": self.data.kind}
        if self.data.kind == "directory":
            data["path"] = self.data.path
        else:
            data["n0"] = self.data.n0
            data["horizon"] = self.data.horizon
            data["feature_dim"] = self.data.feature_dim
            data["seed_graph"] = self.data.seed_graph
            if self.data.kind == "ba":
                data["m"] = self.data.m
            else:
                data.update(m1=self.data.m1, m2=self.data.m2, p=self.data.p)
        labels = {"kind": self.labels.kind}
        if self.labels.kind == "power":
            labels.update(alpha=self.labels.alpha, col=self.labels.col)
        pretrain = {"backbone": self.pretrain.backbone}
        if self.pretrain.backbone == "gcn":
            pretrain.update(layers=self.pretrain.layers,
                            hidden=self.pretrain.hidden,
                            epochs=self.pretrain.epochs,
                            lr=self.pretrain.lr,
                            n_classes=self.pretrain.n_classes)
        est = self.estimator
        return {
            "data": data,
            "labels": labels,
            "task": self.task,
            "t_deploy": self.t_deploy,
            "label_fraction": self.label_fraction,
            "pretrain": pretrain,
            "estimator": {
                "rnn_dim": est.rnn_dim,
                "hidden_dim": est.hidden_dim,
                "lam": est.lam,
                "warmup_epochs": est.warmup_epochs,
                "finetune_epochs": est.finetune_epochs,
                "patience": est.patience,
                "lr": est.lr,
                "augmentation": {"kind": est.augmentation.kind,
                                 "p": est.augmentation.p},
                "attention_slope": est.attention_slope,
                "pool": est.pool,
            },
            "oracle": {"window": self.oracle.window,
                       "epochs": self.oracle.epochs,
                       "patience": self.oracle.patience},
            "baselines": {"linear": self.baselines.linear,
                          "doc": self.baselines.doc,
                          "supervised": self.baselines.supervised},
            "distortion": {"width": self.distortion.width,
                           "xi": self.distortion.xi,
                           "negative_slope": self.distortion.negative_slope,
                           "param_draws": self.distortion.param_draws,
                           "node": self.distortion.node,
                           "max_tau": self.distortion.max_tau},
            "seed": self.seed,
        }


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file, rejecting unknown keys."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    if any(isinstance(v, float) and not math.isfinite(v)
           for v in raw.values()):
        raise ConfigError("config values must be finite")
    return ExperimentConfig.from_dict(raw)
