"""Polynomial filter-bank GNN with a parallel spectral path.

Layout conventions
------------------
* Layer ``l`` coefficients live in an array of shape ``(F_out, F_in, K + 1)``
  indexed ``[f, g, k]``.  The first layer has ``F_in = 1``.
* Inside the forward pass features are stored node-major, ``(n, B, F)``, so
  that every shift is a single ``(n, n) @ (n, B * F)`` product.
* The readout flattens the final ``(n, F)`` features node-major, i.e. entry
  ``i * F + f`` is feature ``f`` at node ``i``.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError, InvalidBasisError
from .linalg import shift_power_apply

ORTHONORMAL_TOL = 1e-8


@dataclass
class FilterBank:
    coeffs: list

    def __post_init__(self):
        self.coeffs = [np.asarray(h, dtype=np.float64) for h in self.coeffs]
        if not self.coeffs:
            raise DimensionError("a filter bank needs at least one layer")
        F, g0, K1 = self.coeffs[0].shape
        if g0 != 1:
            raise DimensionError(f"first layer must take one input feature, got {g0}")
        for layer, h in enumerate(self.coeffs[1:], start=2):
            if h.shape != (F, F, K1):
                raise DimensionError(
                    f"layer {layer} coefficients have shape {h.shape}, "
                    f"expected {(F, F, K1)}"
                )

    @property
    def L(self):
        return len(self.coeffs)

    @property
    def F(self):
        return self.coeffs[0].shape[0]

    @property
    def K(self):
        return self.coeffs[0].shape[2] - 1


@dataclass
class ModelParams:
    """Filter bank plus affine readout ``out = W @ flatten(x_L) + b``.

    The same container doubles as the gradient set, since gradients are
    shape-congruent with the parameters.
    """

    bank: FilterBank
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.weight.shape[0] != self.bias.shape[0]:
            raise DimensionError(
                f"readout weight {self.weight.shape} and bias {self.bias.shape} disagree"
            )
        if self.weight.shape[1] % self.bank.F:
            raise DimensionError("readout input size is not a multiple of F")

    @property
    def n(self):
        return self.weight.shape[1] // self.bank.F

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def arrays(self):
        """All parameter arrays in a fixed order (views, not copies)."""
        return [*self.bank.coeffs, self.weight, self.bias]

    def copy(self):
        return ModelParams(
            FilterBank([h.copy() for h in self.bank.coeffs]),
            self.weight.copy(),
            self.bias.copy(),
        )

    def zeros_like(self):
        return ModelParams(
            FilterBank([np.zeros_like(h) for h in self.bank.coeffs]),
            np.zeros_like(self.weight),
            np.zeros_like(self.bias),
        )

    def to_vector(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_vector(self, vec):
        offset = 0
        for a in self.arrays():
            a[...] = np.reshape(vec[offset : offset + a.size], a.shape)
            offset += a.size

    @property
    def size(self):
        return sum(a.size for a in self.arrays())


def init_params(n, L, F, K, out_dim, seed=None, coeff_scale=None):
    """Random parameters.

    Filter taps of a layer with ``G`` input features are uniform on
    ``[-a, a]`` with the fan-in scale ``a = 1 / sqrt(G (K + 1))``, which puts
    the summed responses ``sum_g h^{fg}(lambda)`` at order one; pass
    ``coeff_scale`` to use one fixed ``a`` for every layer instead.
    Readout weights are uniform on ``[-1/sqrt(nF), 1/sqrt(nF)]``, biases zero.
    """
    rng = np.random.default_rng(seed)
    coeffs = []
    for layer in range(L):
        g = 1 if layer == 0 else F
        a = 1.0 / np.sqrt(g * (K + 1)) if coeff_scale is None else float(coeff_scale)
        coeffs.append(rng.uniform(-a, a, size=(F, g, K + 1)))
    bound = 1.0 / np.sqrt(n * F)
    weight = rng.uniform(-bound, bound, size=(out_dim, n * F))
    return ModelParams(FilterBank(coeffs), weight, np.zeros(out_dim))


# ---------------------------------------------------------------------------
# single filters


def filter_apply(h, S, x):
    """``sum_k h[k] S^k x``."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.size == 0:
        raise DimensionError("filter taps must be a non-empty vector")
    powers = shift_power_apply(S, h.size - 1, x, trace=True)
    out = h[0] * powers[0]
    for hk, p in zip(h[1:], powers[1:]):
        out = out + hk * p
    return out


def spectral_response(h, lam):
    """Frequency response ``h(lam) = sum_k h[k] lam^k`` (Horner)."""
    h = np.asarray(h, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    acc = np.full(lam.shape, h[-1])
    for hk in h[-2::-1]:
        acc = acc * lam + hk
    return acc if acc.ndim else float(acc)


def spectral_response_derivative(h, lam):
    """``h'(lam) = sum_k k h[k] lam^(k-1)`` (Horner)."""
    h = np.asarray(h, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if h.size == 1:
        zero = np.zeros(lam.shape)
        return zero if zero.ndim else 0.0
    dh = h[1:] * np.arange(1, h.size)
    return spectral_response(dh, lam)


@dataclass(frozen=True)
class ResponseConstants:
    C_U: float
    C_L: float
    grid: np.ndarray = field(repr=False)


def estimate_response_constants(h, grid_size=2001):
    """Grid estimates of ``max |h|`` and ``max |h'|`` over [-1, 1]."""
    if grid_size < 2:
        raise DimensionError("grid_size must be at least 2")
    grid = np.linspace(-1.0, 1.0, grid_size)
    return ResponseConstants(
        float(np.max(np.abs(spectral_response(h, grid)))),
        float(np.max(np.abs(spectral_response_derivative(h, grid)))),
        grid,
    )


def bank_response_constants(bank, grid_size=2001):
    """Largest per-filter constants over every filter of the bank."""
    grid = np.linspace(-1.0, 1.0, grid_size)
    c_u = c_l = 0.0
    for h in bank.coeffs:
        taps = h.reshape(-1, h.shape[-1])
        c_u = max(c_u, float(np.abs(_horner_rows(taps, grid)).max()))
        if taps.shape[1] > 1:
            dtaps = taps[:, 1:] * np.arange(1, taps.shape[1])
            c_l = max(c_l, float(np.abs(_horner_rows(dtaps, grid)).max()))
    return ResponseConstants(c_u, c_l, grid)


def stability_constant(n, L, F, C_L, C_U):
    """``(1 + 8 sqrt(n)) L C_L (C_U F)^L``."""
    return (1.0 + 8.0 * np.sqrt(n)) * L * C_L * (C_U * F) ** L


# ---------------------------------------------------------------------------
# forward pass


@dataclass
class LayerTrace:
    products: np.ndarray  # (K+1, n, B, G): S^k applied to this layer's input
    pre: np.ndarray  # (n, B, F)
    post: np.ndarray  # (n, B, F)


@dataclass
class ForwardTrace:
    layers: list
    features: np.ndarray  # (B, n * F) readout input
    output: np.ndarray  # (B, out_dim)
    single: bool = False


def _as_batch(params, S, x):
    S = np.asarray(S, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    n = params.n
    if S.shape != (n, n) or X.ndim != 2 or X.shape[1] != n:
        raise DimensionError(
            f"model expects n={n}; got operator {S.shape} and signals {x.shape}"
        )
    return S, X, single


def _shift_stack(S, H, K):
    """``[S^0 H, ..., S^K H]`` stacked on a new leading axis."""
    n = H.shape[0]
    flat = H.reshape(n, -1)
    out = np.empty((K + 1,) + H.shape)
    out[0] = H
    for k in range(1, K + 1):
        flat = S @ flat
        out[k] = flat.reshape(H.shape)
    return out


def _trunk(bank, S, X, keep):
    H = X.T[:, :, None]  # (n, B, 1)
    layers = []
    for h in bank.coeffs:
        Z = _shift_stack(S, H, bank.K)
        n, B, G = H.shape
        taps = np.ascontiguousarray(h.transpose(2, 1, 0))  # (K+1, G, F)
        U = Z[0].reshape(n * B, G) @ taps[0]
        for k in range(1, bank.K + 1):
            U += Z[k].reshape(n * B, G) @ taps[k]
        U = U.reshape(n, B, -1)
        H = np.maximum(U, 0.0)
        if keep:
            layers.append(LayerTrace(Z, U, H))
    return H, layers


def trunk(params, S, x):
    """Final features before the readout: shape ``(n, F)`` or ``(B, n, F)``."""
    S, X, single = _as_batch(params, S, x)
    H, _ = _trunk(params.bank, S, X, keep=False)
    H = H.transpose(1, 0, 2)
    return H[0] if single else H


def gnn_forward(params, S, x):
    """Run the GNN on one signal ``(n,)`` or a batch ``(B, n)``.

    Returns the readout output (``(out_dim,)`` or ``(B, out_dim)``) and a
    :class:`ForwardTrace` holding what :func:`backward` needs.
    """
    S, X, single = _as_batch(params, S, x)
    H, layers = _trunk(params.bank, S, X, keep=True)
    B = X.shape[0]
    feats = H.transpose(1, 0, 2).reshape(B, -1)
    out = feats @ params.weight.T + params.bias
    trace = ForwardTrace(layers, feats, out, single)
    return (out[0] if single else out), trace


def predict(params, S, x):
    out, _ = gnn_forward(params, S, x)
    return out


def trunk_backward(bank, S, layers, grad_top):
    """Back-propagate ``grad_top`` (shape ``(n, B, F)``) through the trunk.

    Returns one coefficient-gradient array per layer.
    """
    grads = [None] * len(layers)
    delta = grad_top
    for idx in range(len(layers) - 1, -1, -1):
        lt = layers[idx]
        h = bank.coeffs[idx]
        K1, n, B, G = lt.products.shape
        dU = np.where(lt.pre > 0.0, delta, 0.0)
        flat = dU.reshape(n * B, -1)
        gk = np.empty((K1,) + h.shape[:2])
        for k in range(K1):
            gk[k] = flat.T @ lt.products[k].reshape(n * B, G)
        grads[idx] = gk.transpose(1, 2, 0).copy()
        if idx == 0:
            break
        # delta_prev = sum_k (S^T)^k dU h_k, evaluated by Horner
        taps = np.ascontiguousarray(h.transpose(2, 0, 1))  # (K+1, F, G)
        acc = (flat @ taps[K1 - 1]).reshape(n, B * G)
        for k in range(K1 - 2, -1, -1):
            acc = S.T @ acc + (flat @ taps[k]).reshape(n, B * G)
        delta = acc.reshape(n, B, G)
    return grads


# ---------------------------------------------------------------------------
# spectral path


@dataclass
class SpectralOutputs:
    """Per-layer spectral outputs and the argmax records used for routing.

    ``z[l][i]`` is the largest, over output features ``f``, of the summed
    responses ``sum_g h_l^{fg}(lambda_i)``; ``f_star[l][i]`` is that ``f``.
    ``i_star[l]`` indexes the largest entry of ``z[l]``.
    """

    z: list
    f_star: list
    i_star: np.ndarray

    @property
    def max_z(self):
        return np.array([zl[i] for zl, i in zip(self.z, self.i_star)])


def _horner_rows(taps, lam):
    """Evaluate each row of ``taps`` (shape (R, K+1)) at every ``lam``."""
    acc = np.repeat(taps[:, -1:], lam.size, axis=1)
    for k in range(taps.shape[1] - 2, -1, -1):
        acc = acc * lam[None, :] + taps[:, k : k + 1]
    return acc


def layer_responses(bank, eigenvalues):
    """List of ``(F, n)`` arrays: ``sum_g h_l^{fg}(lambda_i)``."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    return [_horner_rows(h.sum(axis=1), lam) for h in bank.coeffs]


def spectral_outputs(bank, eigenvalues):
    """Spectral outputs by direct polynomial evaluation on the eigenvalues."""
    z, f_star, i_star = [], [], []
    for R in layer_responses(bank, eigenvalues):
        f = np.argmax(R, axis=0)
        zl = R[f, np.arange(R.shape[1])]
        z.append(zl)
        f_star.append(f)
        i_star.append(int(np.argmax(zl)))
    return SpectralOutputs(z, f_star, np.array(i_star, dtype=np.intp))


def spectral_outputs_via_eigenvectors(bank, S, V):
    """Spectral outputs along the literal architecture path.

    Each eigenvector is filtered by every filter of the bank, summed over the
    input index and projected back onto itself; a maxout over output features
    follows.  Used as an oracle for :func:`spectral_outputs`.
    """
    V = np.asarray(V, dtype=np.float64)
    n = V.shape[0]
    if V.shape != (n, n) or np.max(np.abs(V.T @ V - np.eye(n))) > ORTHONORMAL_TOL:
        raise InvalidBasisError("eigenvector matrix is not orthonormal")
    z, f_star, i_star = [], [], []
    for h in bank.coeffs:
        F, G, _ = h.shape
        R = np.empty((F, n))
        for f in range(F):
            zf = sum(filter_apply(h[f, g], S, V) for g in range(G))
            R[f] = np.einsum("ij,ij->j", zf, V)
        fs = np.argmax(R, axis=0)
        zl = R[fs, np.arange(n)]
        z.append(zl)
        f_star.append(fs)
        i_star.append(int(np.argmax(zl)))
    return SpectralOutputs(z, f_star, np.array(i_star, dtype=np.intp))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params, path):
    bank = params.bank
    doc = {
        "L": bank.L,
        "F": bank.F,
        "K": bank.K,
        "n": params.n,
        "coeffs": [h.tolist() for h in bank.coeffs],
        "readout": {
            "rows": params.out_dim,
            "cols": params.weight.shape[1],
            "weights": params.weight.ravel().tolist(),
            "bias": params.bias.tolist(),
        },
    }
    # json writes the shortest repr that round-trips, so floats are bit-exact
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        doc = json.loads(path.read_text())
        ro = doc["readout"]
        weight = np.array(ro["weights"], dtype=np.float64).reshape(ro["rows"], ro["cols"])
        params = ModelParams(
            FilterBank([np.array(h, dtype=np.float64) for h in doc["coeffs"]]),
            weight,
            np.array(ro["bias"], dtype=np.float64),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed checkpoint {path}: {exc}") from exc
    bank = params.bank
    if (bank.L, bank.F, bank.K, params.n) != (doc["L"], doc["F"], doc["K"], doc["n"]):
        raise DataError(f"checkpoint {path} header disagrees with its arrays")
    return params
