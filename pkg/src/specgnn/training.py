"""Regularised objective, exact gradients, optimisers and the training loop."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DimensionError, NumericError
from .model import gnn_forward, spectral_outputs, trunk_backward

log = logging.getLogger(__name__)

TASKS = ("classification", "regression")
REGULARIZERS = ("sr", "plain-spectral", "none")


@dataclass(frozen=True)
class LossSpec:
    """Task cost plus spectral regulariser.

    ``regularizer_mode`` selects the per-layer penalty on the largest spectral
    output ``m_l``: ``"sr"`` uses ``|1 - m_l|``, ``"plain-spectral"`` uses
    ``|m_l|`` and ``"none"`` drops the term.  Penalties are averaged over
    layers and weighted by ``gamma``; the task cost is weighted by
    ``fit_weight`` (zero trains the regulariser alone).
    """

    task: str = "classification"
    gamma: float = 0.1
    regularizer_mode: str = "sr"
    fit_weight: float = 1.0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.regularizer_mode not in REGULARIZERS:
            raise ConfigError(f"unknown regularizer mode {self.regularizer_mode!r}")
        if not self.gamma >= 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if not self.fit_weight >= 0:
            raise ConfigError(f"fit_weight must be non-negative, got {self.fit_weight}")


def _penalty(mode, max_z):
    if mode == "sr":
        return np.abs(1.0 - max_z)
    if mode == "plain-spectral":
        return np.abs(max_z)
    return np.zeros_like(max_z)


def _penalty_slope(mode, max_z):
    """Subgradient of the penalty w.r.t. ``max_z`` (zero at the kink)."""
    if mode == "sr":
        return -np.sign(1.0 - max_z)
    if mode == "plain-spectral":
        return np.sign(max_z)
    return np.zeros_like(max_z)


def _check_labels(params, batch, spec):
    if len(batch) == 0:
        raise DataError("empty batch")
    if spec.task == "classification":
        y = batch.y
        if np.any(y < 0) or np.any(y >= params.out_dim) or np.any(y != np.round(y)):
            raise DataError(f"class labels must lie in 0..{params.out_dim - 1}")
    else:
        t = batch.target_index
        if np.any(t < 0) or np.any(t >= params.out_dim):
            raise DataError("regression target index out of range")


def _fit_and_grad(out, batch, spec, want_grad):
    B = out.shape[0]
    if spec.task == "classification":
        y = batch.y.astype(np.intp)
        shifted = out - out.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        fit = float(np.mean(logz - shifted[np.arange(B), y]))
        if not want_grad:
            return fit, None
        d = np.exp(shifted - logz[:, None])
        d[np.arange(B), y] -= 1.0
        return fit, d / B
    t = batch.target_index.astype(np.intp)
    resid = out[np.arange(B), t] - batch.y
    fit = float(np.mean(resid * resid))
    if not want_grad:
        return fit, None
    d = np.zeros_like(out)
    d[np.arange(B), t] = 2.0 * resid / B
    return fit, d


def objective(params, S, eigenvalues, batch, spec):
    """Regularised objective on a batch.

    Returns the scalar value and a breakdown dict with ``fit``,
    ``regularizer`` (layer-averaged penalty, before ``gamma``), per-layer
    ``penalties`` and ``max_z``.  The value equals
    ``fit_weight * fit + gamma * regularizer``.
    """
    value, parts, _, _ = _evaluate(params, S, eigenvalues, batch, spec)
    return value, parts


def _evaluate(params, S, eigenvalues, batch, spec):
    _check_labels(params, batch, spec)
    out, trace = gnn_forward(params, S, batch.X)
    fit, _ = _fit_and_grad(out, batch, spec, want_grad=False)
    spec_out = spectral_outputs(params.bank, eigenvalues)
    max_z = spec_out.max_z
    penalties = _penalty(spec.regularizer_mode, max_z)
    reg = float(np.mean(penalties))
    value = spec.fit_weight * fit + spec.gamma * reg
    parts = {"fit": fit, "regularizer": reg, "penalties": penalties, "max_z": max_z}
    return value, parts, trace, spec_out


def backward(trace, params, S, eigenvalues, batch, spec, spectral=None):
    """Exact (sub)gradient of :func:`objective` w.r.t. every parameter.

    ``trace`` must come from ``gnn_forward(params, S, batch.X)``.  ReLU and
    ``|.|`` use a zero subgradient at their kinks; the regulariser gradient is
    routed only to the recorded argmax eigenvalue and output feature.
    """
    B = len(batch)
    if trace.output.shape != (B, params.out_dim) or len(trace.layers) != params.bank.L:
        raise DimensionError("trace does not match these parameters and batch")
    S = np.asarray(S, dtype=np.float64)
    _, d_out = _fit_and_grad(trace.output, batch, spec, want_grad=True)
    d_out *= spec.fit_weight

    grads = params.zeros_like()
    grads.weight[...] = d_out.T @ trace.features
    grads.bias[...] = d_out.sum(axis=0)

    n, F = params.n, params.bank.F
    d_feat = (d_out @ params.weight).reshape(B, n, F).transpose(1, 0, 2)
    for g, gl in zip(grads.bank.coeffs, trunk_backward(params.bank, S, trace.layers, d_feat)):
        g[...] = gl

    if spec.regularizer_mode != "none" and spec.gamma != 0:
        if spectral is None:
            spectral = spectral_outputs(params.bank, eigenvalues)
        lam = np.asarray(eigenvalues, dtype=np.float64)
        slopes = _penalty_slope(spec.regularizer_mode, spectral.max_z)
        L = params.bank.L
        K = params.bank.K
        for layer in range(L):
            if slopes[layer] == 0:
                continue
            i = spectral.i_star[layer]
            f = spectral.f_star[layer][i]
            powers = lam[i] ** np.arange(K + 1)
            grads.bank.coeffs[layer][f, :, :] += (spec.gamma / L) * slopes[layer] * powers
    return grads


def loss_and_grad(params, S, eigenvalues, batch, spec):
    value, parts, trace, spec_out = _evaluate(params, S, eigenvalues, batch, spec)
    grads = backward(trace, params, S, eigenvalues, batch, spec, spectral=spec_out)
    return value, parts, grads


# ---------------------------------------------------------------------------
# optimisers


def _check_finite(grads):
    offset = 0
    for a in grads.arrays():
        bad = ~np.isfinite(a)
        if bad.any():
            idx = offset + int(np.flatnonzero(bad.ravel())[0])
            raise NumericError(f"non-finite gradient entry at flat index {idx}")
        offset += a.size


@dataclass
class OptimizerState:
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


class Adam:
    """Adam with bias correction; updates parameters in place."""

    def __init__(self, alpha=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = OptimizerState()

    def step(self, params, grads):
        _check_finite(grads)
        st = self.state
        if not st.m:
            st.m = [np.zeros_like(a) for a in params.arrays()]
            st.v = [np.zeros_like(a) for a in params.arrays()]
        st.t += 1
        bc1 = 1.0 - self.beta1**st.t
        bc2 = 1.0 - self.beta2**st.t
        for p, g, m, v in zip(params.arrays(), grads.arrays(), st.m, st.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.alpha * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return params


class SGD:
    """Plain gradient step ``params -= alpha * grads``."""

    def __init__(self, alpha=1e-3):
        self.alpha = alpha
        self.state = OptimizerState()

    def step(self, params, grads):
        _check_finite(grads)
        self.state.t += 1
        for p, g in zip(params.arrays(), grads.arrays()):
            p -= self.alpha * g
        return params


def adam_step(state, params, grads, alpha=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Functional form of one Adam update: returns new ``(params, state)``."""
    opt = Adam(alpha, beta1, beta2, eps)
    opt.state = OptimizerState(
        state.t, [m.copy() for m in state.m], [v.copy() for v in state.v]
    )
    new = params.copy()
    opt.step(new, grads)
    return new, opt.state


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 100
    iterations: int = 1000
    grad_tol: float = 1e-8
    seed: int = 0
    valid_every: int = 50
    loss: LossSpec = LossSpec()
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    optimizer: str = "adam"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.valid_every < 1:
            raise ConfigError("valid_every must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class History:
    """Per-iteration training record; ``final_params`` is the last iterate."""

    L: int
    rows: list = field(default_factory=list)
    final_params: object = None

    def __len__(self):
        return len(self.rows)

    @property
    def columns(self):
        return (
            ["iter", "objective", "fit", "regularizer"]
            + [f"max_z_layer_{l + 1}" for l in range(self.L)]
            + ["valid_metric"]
        )

    def column(self, name):
        return np.array([row[name] for row in self.rows])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow(
                    [row["iter"]]
                    + [_fmt(row[c]) for c in self.columns[1:]]
                )


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.17g}"


def evaluate_metric(params, S, dataset, task):
    """Accuracy for classification, RMSE for regression."""
    from .data import accuracy, rmse

    out, _ = gnn_forward(params, S, dataset.X)
    if task == "classification":
        return accuracy(np.argmax(out, axis=1), dataset.y)
    return rmse(out[np.arange(len(dataset)), dataset.target_index], dataset.y)


def _better(task, new, best):
    # ties go to the later iterate
    if best is None:
        return True
    return new >= best if task == "classification" else new <= best


def train(config, params0, S, eigenvalues, train_set, valid_set=None):
    """Minibatch training of the regularised objective.

    Minibatches are drawn by per-epoch shuffling without replacement.  The
    run stops after ``config.iterations`` steps or once the gradient norm
    falls below ``config.grad_tol``.  When a validation set is given the
    parameters with the best validation metric are returned (the last
    iterate stays available as ``history.final_params``).
    """
    if len(train_set) == 0:
        raise DataError("empty training set")
    if valid_set is not None and len(valid_set) == 0:
        raise DataError("empty validation set")
    spec = config.loss
    params = params0.copy()
    if config.optimizer == "adam":
        opt = Adam(config.alpha, config.beta1, config.beta2)
    else:
        opt = SGD(config.alpha)
    rng = np.random.default_rng(config.seed)
    history = History(params.bank.L)
    best_params, best_metric = params.copy(), None

    order, pos = rng.permutation(len(train_set)), 0
    for it in range(config.iterations):
        if pos >= len(order):
            order, pos = rng.permutation(len(train_set)), 0
        idx = order[pos : pos + config.batch_size]
        pos += config.batch_size
        batch = train_set.subset(idx)

        value, parts, grads = loss_and_grad(params, S, eigenvalues, batch, spec)
        grad_norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.arrays())))
        row = {
            "iter": it,
            "objective": value,
            "fit": parts["fit"],
            "regularizer": parts["regularizer"],
            "valid_metric": float("nan"),
            "grad_norm": grad_norm,
        }
        for l, mz in enumerate(parts["max_z"]):
            row[f"max_z_layer_{l + 1}"] = float(mz)
        history.rows.append(row)

        converged = grad_norm <= config.grad_tol
        if not converged:
            opt.step(params, grads)

        last = converged or it == config.iterations - 1
        if valid_set is not None and ((it + 1) % config.valid_every == 0 or last):
            metric = evaluate_metric(params, S, valid_set, spec.task)
            row["valid_metric"] = metric
            if _better(spec.task, metric, best_metric):
                best_metric, best_params = metric, params.copy()
        if converged:
            log.info("gradient norm %.3e below tolerance at iteration %d", grad_norm, it)
            break

    history.final_params = params
    final = best_params if valid_set is not None else params
    return final, history


# ---------------------------------------------------------------------------
# gradient verification


def _kink_signature(params, S, eigenvalues, batch, spec):
    _, trace = gnn_forward(params, S, batch.X)
    spec_out = spectral_outputs(params.bank, eigenvalues)
    sig = [lt.pre > 0 for lt in trace.layers]
    sig.append(spec_out.i_star.copy())
    sig.append(np.array([fs[i] for fs, i in zip(spec_out.f_star, spec_out.i_star)]))
    sig.append(np.sign(1.0 - spec_out.max_z))
    sig.append(np.sign(spec_out.max_z))
    return sig


def _same_signature(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def finite_diff_check(params, S, eigenvalues, batch, spec, step=1e-6):
    """Largest relative error between back-propagated and central-difference
    gradients.

    A parameter is skipped when nudging it by ``step`` flips a ReLU, an argmax
    record or the sign inside an absolute value, since the objective is not
    differentiable across such kinks.
    """
    if step <= 0:
        raise ConfigError("finite-difference step must be positive")
    _, _, grads = loss_and_grad(params, S, eigenvalues, batch, spec)
    g_bp = grads.to_vector()
    base = params.to_vector()
    probe = params.copy()
    sig0 = _kink_signature(params, S, eigenvalues, batch, spec)
    worst = 0.0
    for j in range(base.size):
        vals = []
        skip = False
        for sgn in (1.0, -1.0):
            vec = base.copy()
            vec[j] += sgn * step
            probe.set_vector(vec)
            if not _same_signature(sig0, _kink_signature(probe, S, eigenvalues, batch, spec)):
                skip = True
                break
            vals.append(objective(probe, S, eigenvalues, batch, spec)[0])
        if skip:
            continue
        g_fd = (vals[0] - vals[1]) / (2.0 * step)
        err = abs(g_fd - g_bp[j]) / max(1e-12, abs(g_fd) + abs(g_bp[j]))
        worst = max(worst, err)
    return worst
