"""Training harness: target functions, Adam, and the collapse taxonomy.

Many independent runs of the same architecture are trained together as one
"ensemble": parameters live in an (R, P) array and every minibatch step is a
handful of stacked matmuls.  Each run keeps its own data, its own shuffling
stream and its own Adam state, so run ``r`` behaves exactly as if it had
been trained alone.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .bdp import first_dead_layers, is_born_dead
from .initializers import He, InitScheme
from .net import Architecture, Dataset, Params, _check_kind, forward, relu
from .rng import SeedStreams, check_random_state
from .stats import wilson

SQRT3 = math.sqrt(3.0)


class TargetFn(enum.Enum):
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"
    F4 = "f4"

    @property
    def d_in(self) -> int:
        return 2 if self is TargetFn.F4 else 1

    @property
    def d_out(self) -> int:
        return 2 if self is TargetFn.F4 else 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if self is TargetFn.F4:
            return np.stack([np.abs(x[:, 0] + x[:, 1]), np.abs(x[:, 0] - x[:, 1])], axis=1)
        t = x[:, :1]
        if self is TargetFn.F1:
            return np.abs(t)
        if self is TargetFn.F2:
            return t * np.sin(5 * t)
        return (t > 0).astype(np.float64) + 0.2 * np.sin(5 * t)

    @classmethod
    def parse(cls, name) -> "TargetFn":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown target {name!r}; choose from f1, f2, f3, f4") from None

    def default_arch(self) -> Architecture:
        """Width d_in + d_out everywhere; depth 10 in 1-D and 20 in 2-D."""
        depth = 20 if self is TargetFn.F4 else 10
        return Architecture.constant(self.d_in, self.d_in + self.d_out, depth, self.d_out)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "L2"
    m: int = 3000
    r: float = SQRT3

    def __post_init__(self):
        _check_kind(self.loss)
        if self.epochs < 0 or self.m < 1 or not 1 <= self.batch_size <= self.m:
            raise ValueError("need epochs >= 0 and 1 <= batch_size <= m")
        if self.lr < 0 or not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            raise ValueError("invalid Adam hyper-parameters")


class Outcome(str, enum.Enum):
    COLLAPSE = "collapse"
    HALF_TRAINED = "half_trained"
    SUCCESS = "success"
    NOT_COLLAPSED = "not_collapsed"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class Thresholds:
    collapse: float = 0.01      # prediction std relative to target std
    rmse: float = 0.05          # success / half-trained fit
    flat_range: float = 0.05    # dead half of a half-trained fit


@dataclass(eq=False)
class TrainReport:
    params: Params
    loss_history: np.ndarray
    outcome: Outcome = Outcome.UNCLASSIFIED
    predictions: Optional[np.ndarray] = None
    diverged: bool = False
    born_dead: Optional[bool] = None

    def to_dict(self, grid: Optional[np.ndarray] = None) -> dict:
        doc = {
            "outcome": self.outcome.value,
            "diverged": self.diverged,
            "born_dead": self.born_dead,
            "loss_history": [float(v) for v in self.loss_history],
            "params": self.params.to_dict(),
        }
        if grid is not None:
            doc["grid"] = grid.tolist()
        if self.predictions is not None:
            doc["predictions"] = self.predictions.tolist()
        return doc


# -- data -------------------------------------------------------------------

def gen_data(target, m: int = 3000, rng=None, r: float = SQRT3) -> Dataset:
    """``m`` inputs uniform on the cube [-r, r]^d_in with their target values."""
    target = TargetFn.parse(target)
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = check_random_state(rng)
    x = rng.uniform(-r, r, size=(m, target.d_in))
    return Dataset(x, target(x), r=r * math.sqrt(target.d_in))


def eval_grid(target, points: int = 401, r: float = SQRT3) -> Dataset:
    """Uniform grid with ``points`` nodes per dimension on [-r, r]^d_in."""
    target = TargetFn.parse(target)
    axis = np.linspace(-r, r, points)
    if target.d_in == 1:
        x = axis[:, None]
    else:
        x = np.stack([g.ravel() for g in np.meshgrid(axis, axis, indexing="ij")], axis=1)
    return Dataset(x, target(x), r=r * math.sqrt(target.d_in))


# -- ensemble engine --------------------------------------------------------

def _views(buf: np.ndarray, arch: Architecture) -> tuple:
    rows = buf.shape[0]
    weights, biases, o = [], [], 0
    for n_out, n_in in arch.shapes:
        weights.append(buf[:, o:o + n_out * n_in].reshape(rows, n_out, n_in))
        o += n_out * n_in
        biases.append(buf[:, o:o + n_out])
        o += n_out
    return weights, biases


class Ensemble:
    """R same-shape networks trained side by side with Adam."""

    def __init__(self, params_list, cfg: TrainConfig):
        self.arch = params_list[0].architecture
        self.cfg = cfg
        self.theta = np.stack([p.flat() for p in params_list])
        self.grad = np.zeros_like(self.theta)
        self.m1 = np.zeros_like(self.theta)
        self.m2 = np.zeros_like(self.theta)
        self.t = 0
        self.weights, self.biases = _views(self.theta, self.arch)
        self.g_w, self.g_b = _views(self.grad, self.arch)

    def __len__(self):
        return self.theta.shape[0]

    def forward(self, x: np.ndarray) -> tuple:
        """Pre-activations and layer inputs for stacked inputs ``x`` of shape (R, B, d_in)."""
        pre, acts = [], [x]
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = np.matmul(acts[-1], w.transpose(0, 2, 1)) + b[:, None, :]
            pre.append(z)
            if l < last:
                acts.append(relu(z))
        return pre, acts

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0][-1]

    def backward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Fill ``self.grad`` with the mean-loss gradient; return per-run losses."""
        pre, acts = self.forward(x)
        diff = pre[-1] - y
        batch = x.shape[1]
        if self.cfg.loss == "L2":
            losses = np.einsum("rbk,rbk->r", diff, diff) / batch
            delta = 2.0 * diff / batch
        else:
            losses = np.abs(diff).sum(axis=(1, 2)) / batch
            delta = np.sign(diff) / batch
        for l in range(len(self.weights) - 1, -1, -1):
            np.matmul(delta.transpose(0, 2, 1), acts[l], out=self.g_w[l])
            np.sum(delta, axis=1, out=self.g_b[l])
            if l > 0:
                delta = np.matmul(delta, self.weights[l]) * (pre[l - 1] > 0)
        return losses

    def adam_step(self):
        c = self.cfg
        self.t += 1
        g = self.grad
        self.m1 *= c.beta1
        self.m1 += (1.0 - c.beta1) * g
        self.m2 *= c.beta2
        self.m2 += (1.0 - c.beta2) * (g * g)
        m_hat = self.m1 / (1.0 - c.beta1 ** self.t)
        v_hat = self.m2 / (1.0 - c.beta2 ** self.t)
        self.theta -= c.lr * m_hat / (np.sqrt(v_hat) + c.eps)

    def params(self, r: int) -> Params:
        return Params.from_flat(self.arch, self.theta[r])


def train_ensemble(params_list, x: np.ndarray, y: np.ndarray, cfg: TrainConfig, rngs) -> tuple:
    """Train R runs on their own (R, m, d) data; shuffle run r with ``rngs[r]``.

    Returns the ensemble, an (R, epochs) loss history and a diverged mask.
    A run whose epoch loss turns non-finite is rolled back to the previous
    epoch's parameters and frozen there.
    """
    ens = Ensemble(params_list, cfg)
    runs, m = x.shape[0], x.shape[1]
    history = np.zeros((runs, cfg.epochs))
    diverged = np.zeros(runs, dtype=bool)
    full = cfg.batch_size >= m
    with np.errstate(all="ignore"):
        for epoch in range(cfg.epochs):
            snapshot = ens.theta.copy()
            total = np.zeros(runs)
            if full:
                total += ens.backward(x, y) * m
                ens.adam_step()
            else:
                perm = np.stack([g.permutation(m) for g in rngs])
                for s in range(0, m, cfg.batch_size):
                    idx = perm[:, s:s + cfg.batch_size, None]
                    xb = np.take_along_axis(x, idx, axis=1)
                    yb = np.take_along_axis(y, idx, axis=1)
                    total += ens.backward(xb, yb) * idx.shape[1]
                    ens.adam_step()
            if diverged.any():
                ens.theta[diverged] = frozen[diverged]
            history[:, epoch] = total / m
            bad = ~np.isfinite(history[:, epoch]) | ~np.all(np.isfinite(ens.theta), axis=1)
            newly = bad & ~diverged
            if newly.any():
                ens.theta[newly] = snapshot[newly]
                diverged |= newly
                frozen = ens.theta.copy()
    return ens, history, diverged


def adam_train(params: Params, data: Dataset, cfg: TrainConfig = TrainConfig(), rng=None) -> TrainReport:
    """Minibatch Adam with bias-corrected moments on one network."""
    if data.targets is None:
        raise ValueError("training needs targets")
    arch = params.architecture
    if data.d_in != arch.d_in or data.targets.shape[1] != arch.d_out:
        raise ValueError("data shape does not match the network")
    cfg = replace(cfg, m=len(data), batch_size=min(cfg.batch_size, len(data)))
    ens, history, diverged = train_ensemble(
        [params], data.inputs[None], data.targets[None], cfg, [check_random_state(rng)])
    return TrainReport(ens.params(0), history[0], diverged=bool(diverged[0]))


# -- outcome classification -------------------------------------------------

def classify_predictions(pred: np.ndarray, target, grid: Dataset,
                         thresholds: Thresholds = Thresholds()) -> Outcome:
    target = TargetFn.parse(target)
    pred = np.asarray(pred, dtype=np.float64).reshape(len(grid), -1)
    truth = grid.targets
    if not np.all(np.isfinite(pred)):
        return Outcome.NOT_COLLAPSED
    if np.all(pred.std(axis=0) < thresholds.collapse * truth.std(axis=0)):
        return Outcome.COLLAPSE
    if target is not TargetFn.F1:
        return Outcome.NOT_COLLAPSED
    err = (pred - truth)[:, 0]
    if math.sqrt(np.mean(err ** 2)) < thresholds.rmse:
        return Outcome.SUCCESS
    x = grid.inputs[:, 0]
    for fit, flat in ((x >= 0, x <= 0), (x <= 0, x >= 0)):
        fit_ok = math.sqrt(np.mean(err[fit] ** 2)) < thresholds.rmse
        if fit_ok and np.ptp(pred[flat, 0]) < thresholds.flat_range:
            return Outcome.HALF_TRAINED
    return Outcome.NOT_COLLAPSED


def classify_outcome(params: Params, target, grid: Optional[Dataset] = None,
                     thresholds: Thresholds = Thresholds()) -> Outcome:
    """Collapse / HalfTrained / Success / NotCollapsed on a dense evaluation grid.

    Collapse means every output coordinate varies by less than 1% of the
    target's spread.  Success and HalfTrained exist only for f1.
    """
    grid = grid if grid is not None else eval_grid(target)
    return classify_predictions(forward(params, grid.inputs), target, grid, thresholds)


# -- sweeps -----------------------------------------------------------------

@dataclass
class SweepResult:
    target: TargetFn
    init: str
    runs: int
    outcomes: list
    born_dead: list
    diverged: list
    thresholds: Thresholds = field(default_factory=Thresholds)

    def count(self, outcome: Outcome) -> int:
        return sum(o is outcome for o in self.outcomes)

    def proportion(self, outcome: Outcome) -> float:
        return self.count(outcome) / self.runs

    def ci(self, outcome: Outcome) -> tuple:
        return wilson(self.count(outcome), self.runs)

    @property
    def table(self) -> dict:
        kinds = [Outcome.COLLAPSE, Outcome.HALF_TRAINED, Outcome.SUCCESS, Outcome.NOT_COLLAPSED]
        return {o.value: (self.count(o), self.proportion(o), self.ci(o)) for o in kinds}

    @property
    def collapsed_after_training(self) -> float:
        """Share of runs that were alive at initialization yet collapsed."""
        return sum(o is Outcome.COLLAPSE and not bd
                   for o, bd in zip(self.outcomes, self.born_dead)) / self.runs


def _sweep_chunk(target, arch, scheme, cfg, streams, runs, grid, thresholds):
    rngs = [streams.stream(r) for r in runs]
    params = [scheme.sample(arch, g) for g in rngs]
    data = [gen_data(target, cfg.m, g, cfg.r) for g in rngs]
    x = np.stack([d.inputs for d in data])
    y = np.stack([d.targets for d in data])
    weights = [np.stack(ws) for ws in zip(*(p.weights for p in params))]
    biases = [np.stack(bs) for bs in zip(*(p.biases for p in params))]
    born_dead = first_dead_layers(weights, biases, x) > 0
    ens, _, diverged = train_ensemble(params, x, y, cfg, rngs)
    outcomes = []
    for r in range(len(runs)):
        pred = forward(ens.params(r), grid.inputs)
        outcomes.append(classify_predictions(pred, target, grid, thresholds))
    return outcomes, born_dead.tolist(), diverged.tolist()


def sweep_train(target, arch: Optional[Architecture] = None, scheme: InitScheme = He(),
                cfg: TrainConfig = TrainConfig(), runs: int = 200, seed: int = 0, jobs: int = 1,
                chunk: int = 100, grid_points: int = 401,
                thresholds: Thresholds = Thresholds()) -> SweepResult:
    """Independent init + train + classify runs; run ``r`` uses stream ``r`` of ``seed``.

    Born-dead status is judged on each run's own training inputs.
    """
    target = TargetFn.parse(target)
    if runs < 1:
        raise ValueError("runs must be >= 1")
    arch = arch or target.default_arch()
    grid = eval_grid(target, grid_points)
    streams = SeedStreams(seed)
    pieces = [range(s, min(s + chunk, runs)) for s in range(0, runs, chunk)]
    args = (target, arch, scheme, cfg, streams)
    if jobs == 1 or len(pieces) == 1:
        parts = [_sweep_chunk(*args, p, grid, thresholds) for p in pieces]
    else:
        parts = Parallel(n_jobs=jobs)(delayed(_sweep_chunk)(*args, p, grid, thresholds) for p in pieces)
    outcomes, born_dead, diverged = [], [], []
    for o, b, d in parts:
        outcomes += o
        born_dead += b
        diverged += d
    return SweepResult(target, scheme.name, runs, outcomes, born_dead, diverged, thresholds)


# -- dead-network limit -----------------------------------------------------

@dataclass(frozen=True)
class DeadLimit:
    constant: np.ndarray
    reference: np.ndarray
    gap: float
    frozen: bool            # layer-1 parameters bitwise unchanged
    still_dead: bool


def make_dead(arch: Architecture, rng=None) -> Params:
    """He-initialized network whose first layer is forced inactive on x >= 0."""
    rng = check_random_state(rng)
    weights, biases = He().draw(arch, rng)
    weights[0] = -np.abs(weights[0])
    biases[0] = -np.abs(rng.standard_normal(biases[0].shape))
    return Params(tuple(weights), tuple(biases))


def verify_dead_limit(arch: Architecture, data: Dataset, kind: str = "L2", steps: int = 10_000,
                      lr: float = 1e-3, seed: int = 0) -> DeadLimit:
    """Train a deliberately born-dead net full-batch and compare with the loss minimizer.

    Inputs are shifted into the positive orthant so the sign-forced first
    layer is inactive everywhere.  The minimizing constant is the target
    mean for L2 and the coordinatewise median for L1.
    """
    _check_kind(kind)
    if data.targets is None:
        raise ValueError("need targets")
    x = data.inputs - data.inputs.min(axis=0)
    shifted = Dataset(x, data.targets)
    params = make_dead(arch, seed)
    cfg = TrainConfig(epochs=steps, batch_size=len(data), lr=lr, loss=kind, m=len(data))
    report = adam_train(params, shifted, cfg, seed)
    out = forward(report.params, x)
    constant = out.mean(axis=0)
    ref = data.targets.mean(axis=0) if kind == "L2" else np.median(data.targets, axis=0)
    frozen = (np.array_equal(report.params.weights[0], params.weights[0])
              and np.array_equal(report.params.biases[0], params.biases[0]))
    return DeadLimit(constant, ref, float(np.max(np.abs(out - ref))), frozen,
                     is_born_dead(report.params, shifted).dead)
