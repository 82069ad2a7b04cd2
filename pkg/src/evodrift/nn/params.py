"""Named parameter tensors with a flat-vector view and a text checkpoint.

A ParamBundle is an ordered collection of (name, component, array) entries.
The flat view concatenates the arrays row-major in entry order, which is
what the optimizer and the perturbation operator work on; unflatten restores
the original shapes.  Component tags group entries by the model part that
owns them ("gcn", "extractor", "predictor", "decoder") so checkpoints can be
split back into per-part bundles.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import CheckpointFormatError, ConfigError, DimensionError

__all__ = [
    "ParamBundle",
    "uniform_init",
    "gcn_bundle",
    "extractor_bundle",
    "predictor_bundle",
    "decoder_bundle",
    "save_params",
    "load_params",
    "split_components",
]

_MAGIC = "evodrift-params v1"


class ParamBundle:
    """Ordered named tensors with flatten/unflatten round-tripping."""

    def __init__(self, entries):
        names = []
        arrays = {}
        components = {}
        for name, component, arr in entries:
            if name in arrays:
                raise ConfigError(f"duplicate parameter name {name!r}")
            arrays[name] = np.array(arr, dtype=np.float64)
            components[name] = str(component)
            names.append(str(name))
        self._names = tuple(names)
        self._arrays = arrays
        self._components = components

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value):
        if name not in self._arrays:
            raise ConfigError(f"unknown parameter name {name!r}")
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._arrays[name].shape:
            raise DimensionError(
                f"parameter {name!r} has shape {self._arrays[name].shape}, "
                f"got {value.shape}")
        self._arrays[name] = value.copy()

    def __contains__(self, name) -> bool:
        return name in self._arrays

    def component(self, name: str) -> str:
        return self._components[name]

    @property
    def components(self) -> tuple[str, ...]:
        seen = []
        for name in self._names:
            tag = self._components[name]
            if tag not in seen:
                seen.append(tag)
        return tuple(seen)

    @property
    def size(self) -> int:
        return sum(self._arrays[n].size for n in self._names)

    def entries(self):
        for name in self._names:
            yield name, self._components[name], self._arrays[name]

    def copy(self) -> "ParamBundle":
        return ParamBundle(self.entries())

    def flatten(self) -> np.ndarray:
        if not self._names:
            return np.zeros(0)
        return np.concatenate([self._arrays[n].ravel() for n in self._names])

    def flatten_like(self, mapping) -> np.ndarray:
        """Flatten a name-keyed dict of arrays (e.g. gradients) in this
        bundle's entry order, shape-checked against the parameters."""
        parts = []
        for name in self._names:
            g = np.asarray(mapping[name], dtype=np.float64)
            if g.shape != self._arrays[name].shape:
                raise DimensionError(
                    f"gradient for {name!r} has shape {g.shape}, parameter "
                    f"has {self._arrays[name].shape}")
            parts.append(g.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def unflatten(self, flat) -> "ParamBundle":
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.size != self.size:
            raise DimensionError(
                f"flat vector has {flat.size} entries, bundle holds "
                f"{self.size}")
        out = []
        at = 0
        for name in self._names:
            arr = self._arrays[name]
            out.append((name, self._components[name],
                        flat[at: at + arr.size].reshape(arr.shape)))
            at += arr.size
        return ParamBundle(out)

    def __repr__(self):
        parts = ", ".join(f"{n}{self._arrays[n].shape}" for n in self._names)
        return f"ParamBundle({parts})"


def uniform_init(rng, shape, fan_in: int) -> np.ndarray:
    """Uniform(-s, s) with s = 1/sqrt(fan_in)."""
    s = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-s, s, shape)


def gcn_bundle(dims, rng) -> ParamBundle:
    """Stacked graph-convolution weights for layer widths dims[0] -> ... ->
    dims[-1]; entry names layer0, layer1, ..."""
    if len(dims) < 2:
        raise ConfigError("need at least input and output widths")
    entries = []
    for k in range(len(dims) - 1):
        w = uniform_init(rng, (dims[k], dims[k + 1]), dims[k])
        entries.append((f"layer{k}", "gcn", w))
    return ParamBundle(entries)


def extractor_bundle(in_dim: int, out_dim: int, rng) -> ParamBundle:
    """Single-head attention extractor: projection plus the two halves of
    the attention vector (source score and destination score)."""
    return ParamBundle([
        ("weight", "extractor", uniform_init(rng, (in_dim, out_dim), in_dim)),
        ("att_src", "extractor", uniform_init(rng, (out_dim,), out_dim)),
        ("att_dst", "extractor", uniform_init(rng, (out_dim,), out_dim)),
    ])


def predictor_bundle(in_dim: int, hidden: int, rng) -> ParamBundle:
    """LSTM cell (gate row order: input, forget, candidate, output) plus a
    scalar linear readout of the hidden state.  Biases start at zero."""
    return ParamBundle([
        ("in_weight", "predictor",
         uniform_init(rng, (4 * hidden, in_dim), in_dim)),
        ("rec_weight", "predictor",
         uniform_init(rng, (4 * hidden, hidden), hidden)),
        ("gate_bias", "predictor", np.zeros(4 * hidden)),
        ("readout_weight", "predictor", uniform_init(rng, (hidden,), hidden)),
        ("readout_bias", "predictor", np.zeros(1)),
    ])


def decoder_bundle(embed_dim: int, rnn_dim: int, rng) -> ParamBundle:
    """Single-layer feature decoder mapping extractor output back to the
    embedding space: reconstruction = F @ mix.T."""
    return ParamBundle([
        ("mix", "decoder", uniform_init(rng, (embed_dim, rnn_dim), rnn_dim)),
    ])


# ---------------------------------------------------------------------------
# text checkpoint


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_params(path, bundle: ParamBundle, header: dict | None = None) -> None:
    """Write a text checkpoint: magic line, header key/value lines, then one
    shape line plus row-major decimal values per tensor.  Values round-trip
    exactly (17 significant digits)."""
    lines = [_MAGIC]
    for key, value in (header or {}).items():
        key = str(key)
        if any(ch.isspace() for ch in key):
            raise ConfigError(f"header key {key!r} contains whitespace")
        lines.append(f"header {key} {value}")
    names = bundle.names
    lines.append(f"tensors {len(names)}")
    for name, component, arr in bundle.entries():
        if arr.ndim > 2:
            raise ConfigError(
                f"checkpoint format stores vectors and matrices; {name!r} "
                f"has {arr.ndim} dimensions")
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"tensor {component} {name} {arr.ndim} {dims}".rstrip())
        rows = arr.reshape(1, -1) if arr.ndim <= 1 else arr
        for row in rows:
            lines.append(" ".join(_fmt(v) for v in np.atleast_1d(row)))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> tuple[ParamBundle, dict]:
    """Inverse of :func:`save_params`; returns (bundle, header dict)."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise CheckpointFormatError("missing checkpoint magic line",
                                    path=path, line=1)
    at = 1
    header = {}
    while at < len(lines) and lines[at].startswith("header "):
        parts = lines[at].split(" ", 2)
        if len(parts) != 3:
            raise CheckpointFormatError("malformed header line", path=path,
                                        line=at + 1)
        header[parts[1]] = parts[2]
        at += 1
    if at >= len(lines) or not lines[at].startswith("tensors "):
        raise CheckpointFormatError("missing tensor count", path=path,
                                    line=at + 1)
    try:
        count = int(lines[at].split()[1])
    except (IndexError, ValueError) as exc:
        raise CheckpointFormatError("bad tensor count", path=path,
                                    line=at + 1) from exc
    at += 1
    entries = []
    for _ in range(count):
        if at >= len(lines) or not lines[at].startswith("tensor "):
            raise CheckpointFormatError("expected a tensor line", path=path,
                                        line=at + 1)
        parts = lines[at].split()
        try:
            component, name, ndim = parts[1], parts[2], int(parts[3])
            shape = tuple(int(d) for d in parts[4: 4 + ndim])
            if len(shape) != ndim:
                raise ValueError
        except (IndexError, ValueError) as exc:
            raise CheckpointFormatError("malformed tensor line", path=path,
                                        line=at + 1) from exc
        at += 1
        n_rows = 1 if ndim <= 1 else shape[0]
        values = []
        for _ in range(n_rows):
            if at >= len(lines):
                raise CheckpointFormatError("truncated tensor data",
                                            path=path, line=at + 1)
            try:
                values.append([float(v) for v in lines[at].split()])
            except ValueError as exc:
                raise CheckpointFormatError("non-numeric tensor value",
                                            path=path, line=at + 1) from exc
            at += 1
        try:
            arr = np.array(values, dtype=np.float64).reshape(shape)
        except ValueError as exc:
            raise CheckpointFormatError(
                f"tensor {name!r} data does not match its shape",
                path=path, line=at) from exc
        entries.append((name, component, arr))
    return ParamBundle(entries), header


def split_components(bundle: ParamBundle) -> dict[str, ParamBundle]:
    """Group a mixed bundle into one bundle per component tag, preserving
    entry order."""
    grouped: dict[str, list] = {}
    for name, component, arr in bundle.entries():
        grouped.setdefault(component, []).append((name, component, arr))
    return {tag: ParamBundle(rows) for tag, rows in grouped.items()}
