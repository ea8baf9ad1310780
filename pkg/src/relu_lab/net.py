"""Dense feed-forward ReLU networks in plain numpy.

A network with widths ``[N0, N1, ..., NL]`` has ``L`` affine layers.  Layer
``l`` maps ``N_{l-1}`` inputs to ``N_l`` pre-activations; ReLU is applied
after every layer except the last, whose pre-activation is the output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

LOSS_KINDS = ("L2", "L1")


class ShapeError(ValueError):
    """Raised when an input does not match the network architecture."""


@dataclass(frozen=True)
class Architecture:
    """Layer widths ``[d_in, N1, ..., N_{L-1}, d_out]``."""

    widths: tuple

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("an architecture needs at least an input and an output width")
        if any(w < 1 for w in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        object.__setattr__(self, "widths", widths)

    @classmethod
    def constant(cls, d_in: int, width: int, depth: int, d_out: int = 1) -> "Architecture":
        """``depth`` layers with ``depth - 1`` hidden layers of equal ``width``."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        return cls((d_in,) + (width,) * (depth - 1) + (d_out,))

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def d_in(self) -> int:
        return self.widths[0]

    @property
    def d_out(self) -> int:
        return self.widths[-1]

    @property
    def hidden(self) -> tuple:
        """Widths of the hidden layers ``N1..N_{L-1}`` (empty when L = 1)."""
        return self.widths[1:-1]

    @property
    def shapes(self) -> list:
        return [(n_out, n_in) for n_in, n_out in zip(self.widths[:-1], self.widths[1:])]

    @property
    def n_params(self) -> int:
        return sum(r * c + r for r, c in self.shapes)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Params:
    """Weights and biases of every layer; arrays are read-only copies."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        weights = tuple(_frozen(w) for w in self.weights)
        biases = tuple(_frozen(b) for b in self.biases)
        if len(weights) != len(biases) or not weights:
            raise ShapeError("need the same, nonzero number of weight matrices and bias vectors")
        for l, (w, b) in enumerate(zip(weights, biases), start=1):
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ShapeError(f"layer {l}: weight {w.shape} and bias {b.shape} disagree")
            if l > 1 and w.shape[1] != weights[l - 2].shape[0]:
                raise ShapeError(f"layer {l}: fan-in {w.shape[1]} != width {weights[l - 2].shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l}: parameters must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def architecture(self) -> Architecture:
        return Architecture((self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights))

    @property
    def depth(self) -> int:
        return len(self.weights)

    def __eq__(self, other):
        if not isinstance(other, Params):
            return NotImplemented
        if self.depth != other.depth:
            return False
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )

    __hash__ = None

    @classmethod
    def zeros(cls, arch: Architecture) -> "Params":
        return cls(
            tuple(np.zeros(s) for s in arch.shapes),
            tuple(np.zeros(s[0]) for s in arch.shapes),
        )

    def flat(self) -> np.ndarray:
        """All parameters as one vector, layer by layer, weights (row-major) then bias."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, arch: Architecture, theta) -> "Params":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (arch.n_params,):
            raise ShapeError(f"expected {arch.n_params} parameters, got {theta.shape}")
        weights, biases, o = [], [], 0
        for r, c in arch.shapes:
            weights.append(theta[o:o + r * c].reshape(r, c))
            o += r * c
            biases.append(theta[o:o + r])
            o += r
        return cls(tuple(weights), tuple(biases))

    def to_dict(self) -> dict:
        # float -> python float keeps repr() shortest round-trip printing
        return {
            "widths": list(self.architecture.widths),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "Params":
        params = cls(
            tuple(np.array(w, dtype=np.float64).reshape(len(w), -1) for w in doc["weights"]),
            tuple(np.array(b, dtype=np.float64) for b in doc["biases"]),
        )
        if "widths" in doc and list(params.architecture.widths) != list(doc["widths"]):
            raise ShapeError(f"widths {doc['widths']} do not match the stored matrices")
        return params

    @classmethod
    def from_json(cls, text: str) -> "Params":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ActivationTrace:
    """Per-layer pre-activations, hidden post-activations, and the output."""

    pre: list
    post: list
    output: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs (m, d_in), optional targets (m, d_out), and a radius r with ||x|| <= r."""

    inputs: np.ndarray
    targets: Optional[np.ndarray] = None
    r: Optional[float] = field(default=None)

    def __post_init__(self):
        x = np.array(self.inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("a dataset needs at least one input vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("inputs must be finite")
        x.flags.writeable = False
        norms = np.linalg.norm(x, axis=1)
        r = float(norms.max()) if self.r is None else float(self.r)
        if np.any(norms > r * (1 + 1e-12)):
            raise ValueError(f"inputs leave the ball of radius {r}")
        y = self.targets
        if y is not None:
            y = np.array(y, dtype=np.float64)
            if y.ndim == 1:
                y = y[:, None]
            if y.shape[0] != x.shape[0]:
                raise ShapeError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
            y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "r", r)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def d_in(self) -> int:
        return self.inputs.shape[1]


def relu(v):
    """Elementwise ``max(v, 0)``; inactive entries are exactly +0.0."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(v > 0, v, 0.0)


def _as_batch(params: Params, x) -> tuple:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim <= 1
    xb = np.atleast_1d(x)[None, :] if single else x
    d_in = params.weights[0].shape[1]
    if xb.ndim != 2 or xb.shape[1] != d_in:
        raise ShapeError(f"expected input dimension {d_in}, got shape {x.shape}")
    return xb, single


def forward(params: Params, x) -> np.ndarray:
    """Network output for one input vector or a batch of rows."""
    h, single = _as_batch(params, x)
    last = params.depth - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        h = z if l == last else relu(z)
    return h[0] if single else h


def forward_trace(params: Params, x) -> ActivationTrace:
    """Like :func:`forward` but keeps every layer's activations.

    Works for a single vector or a batch; for a batch each entry of ``pre``
    and ``post`` has one row per input.
    """
    h, single = _as_batch(params, x)
    pre, post = [], []
    last = params.depth - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre.append(z[0] if single else z)
        if l < last:
            h = relu(z)
            post.append(h[0] if single else h)
    output = pre[-1]
    return ActivationTrace(pre, post, output)


def _check_kind(kind: str) -> str:
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}; choose from {LOSS_KINDS}")
    return kind


def loss(pred, target, kind: str = "L2") -> float:
    """Squared Euclidean (L2) or absolute (L1) error; mean over rows for batches."""
    _check_kind(kind)
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    per = diff ** 2 if kind == "L2" else np.abs(diff)
    if per.ndim <= 1:
        return float(per.sum())
    return float(per.sum(axis=-1).mean())


def loss_grad(pred: np.ndarray, target: np.ndarray, kind: str) -> np.ndarray:
    """Gradient of the mean batch loss with respect to the (m, d_out) predictions."""
    m = pred.shape[-2]
    diff = pred - target
    if kind == "L2":
        return 2.0 * diff / m
    return np.sign(diff) / m


def backprop(params: Params, batch: Dataset, kind: str = "L2") -> Params:
    """Gradient of the mean batch loss, shaped like ``params``.

    The ReLU subgradient at exactly zero is taken to be 0, so a hidden layer
    that is inactive on the whole batch zeroes every gradient below it.
    """
    _check_kind(kind)
    if batch.targets is None:
        raise ValueError("backprop needs a dataset with targets")
    x, y = batch.inputs, batch.targets
    trace = forward_trace(params, x)
    if y.shape != trace.output.shape:
        raise ShapeError(f"targets {y.shape} vs outputs {trace.output.shape}")
    delta = loss_grad(trace.output, y, kind)
    acts = [x] + trace.post
    g_w, g_b = [None] * params.depth, [None] * params.depth
    for l in range(params.depth - 1, -1, -1):
        g_w[l] = delta.T @ acts[l]
        g_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l]) * (trace.pre[l - 1] > 0)
    return Params(tuple(g_w), tuple(g_b))


def stack(params_list: Sequence[Params]) -> tuple:
    """Stack same-architecture networks into (R, n_out, n_in) / (R, n_out) arrays."""
    weights = [np.stack(ws) for ws in zip(*(p.weights for p in params_list))]
    biases = [np.stack(bs) for bs in zip(*(p.biases for p in params_list))]
    return weights, biases
