"""Graph shift operators: generation, normalisation, perturbation, relabeling."""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    GenerationError,
    InvalidPermutationError,
)
from .linalg import SYMMETRY_TOL, check_symmetric, operator_norm

KINDS = ("raw-adjacency", "normalized-adjacency", "similarity")
SBM_MAX_TRIES = 20


@dataclass(frozen=True)
class Graph:
    """A symmetric shift operator plus optional node metadata.

    ``communities`` holds one block label per node for SBM graphs; ``names``
    maps node positions back to external identifiers (movie ids, say).
    """

    shift: np.ndarray
    kind: str = "raw-adjacency"
    communities: np.ndarray = None
    names: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown graph kind {self.kind!r}")
        check_symmetric(self.shift, name="shift operator")

    @property
    def n(self):
        return self.shift.shape[0]

    @property
    def num_edges(self):
        return int(np.count_nonzero(np.triu(self.shift, 1)))

    def degrees(self):
        off = self.shift - np.diag(np.diag(self.shift))
        return np.count_nonzero(off, axis=1)


@dataclass(frozen=True)
class PermutationMap:
    """Relabeling of nodes: new node ``i`` is old node ``mapping[i]``.

    The induced matrix has ``P[mapping[i], i] = 1``, so ``P^T x = x[mapping]``.
    """

    mapping: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mapping)
        if m.ndim != 1 or not np.array_equal(np.sort(m), np.arange(m.size)):
            raise InvalidPermutationError("mapping is not a bijection on 0..n-1")
        object.__setattr__(self, "mapping", m.astype(np.intp))

    @classmethod
    def random(cls, n, seed=None):
        return cls(np.random.default_rng(seed).permutation(n))

    @property
    def n(self):
        return self.mapping.size

    def inverse(self):
        return PermutationMap(np.argsort(self.mapping))

    def matrix(self):
        P = np.zeros((self.n, self.n))
        P[self.mapping, np.arange(self.n)] = 1.0
        return P


def is_connected(A):
    if A.shape[0] <= 1:
        return True
    ncomp, _ = connected_components(np.asarray(A) != 0, directed=False)
    return ncomp == 1


def sbm_generate(n, c, p_intra, p_inter, seed=None):
    """Stochastic block model with ``c`` equal contiguous communities.

    Disconnected draws are discarded; after 20 consecutive failures a
    :class:`GenerationError` is raised.
    """
    if c < 1 or n % c:
        raise ConfigError(f"community count {c} does not divide node count {n}")
    for p in (p_intra, p_inter):
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"edge probability {p} outside [0, 1]")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(c), n // c)
    same = labels[:, None] == labels[None, :]
    probs = np.where(same, p_intra, p_inter)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    for _ in range(SBM_MAX_TRIES):
        draw = rng.random((n, n)) < probs
        A = (draw & upper).astype(np.float64)
        A = A + A.T
        if is_connected(A):
            return Graph(A, "raw-adjacency", communities=labels)
    raise GenerationError(
        f"{SBM_MAX_TRIES} consecutive SBM draws were disconnected "
        f"(n={n}, c={c}, p_intra={p_intra}, p_inter={p_inter})"
    )


def normalize_shift(A):
    """Scale an adjacency so its spectrum lies in [-1, 1].

    Accepts a :class:`Graph` (metadata is kept) or a bare matrix.
    """
    base = A if isinstance(A, Graph) else None
    M = check_symmetric(base.shift if base is not None else A, name="adjacency")
    if np.any(M < 0):
        raise DegenerateInputError("adjacency has negative entries")
    scale = operator_norm(M)
    if scale == 0.0:
        raise DegenerateInputError("cannot normalize the zero matrix")
    S = M / scale
    if base is None:
        return Graph(S, "normalized-adjacency")
    return replace(base, shift=S, kind="normalized-adjacency")


def perturb(S, eps, mode="dense", seed=None):
    """Return ``S + E`` with ``E`` symmetric and ``||E||_2 = eps``.

    ``mode="dense"`` draws every upper-triangular entry of ``E`` from a
    standard normal; ``mode="edges-only"`` keeps only entries on the support
    of ``S`` (existing edges and the diagonal).
    """
    S = check_symmetric(S, name="shift operator")
    if eps < 0:
        raise ConfigError(f"perturbation size must be non-negative, got {eps}")
    if mode not in ("dense", "edges-only"):
        raise ConfigError(f"unknown perturbation mode {mode!r}")
    if eps == 0:
        return S.copy()
    n = S.shape[0]
    rng = np.random.default_rng(seed)
    U = np.triu(rng.standard_normal((n, n)))
    if mode == "edges-only":
        offdiag = S - np.diag(np.diag(S))
        if not np.any(offdiag):
            raise DegenerateInputError("edges-only perturbation of an edgeless graph")
        U = np.where((S != 0) | np.eye(n, dtype=bool), U, 0.0)
    E = U + np.triu(U, 1).T
    E *= eps / operator_norm(E)
    return S + E


def permute_graph(S, P):
    """``P^T S P`` by index relabeling."""
    S = np.asarray(S)
    if S.shape != (P.n, P.n):
        raise ConfigError(f"permutation of size {P.n} for operator {S.shape}")
    return S[np.ix_(P.mapping, P.mapping)]


def permute_signal(x, P):
    """``P^T x`` by index relabeling (first axis is the node axis)."""
    x = np.asarray(x)
    if x.shape[0] != P.n:
        raise ConfigError(f"permutation of size {P.n} for signal {x.shape}")
    return x[P.mapping]


def knn_sparsify(W, k):
    """Keep each node's ``k`` strongest edges, union-symmetrise, normalise.

    Ties are broken in favour of the lower neighbour index.  Non-positive
    weights never become edges.
    """
    W = check_symmetric(W, name="similarity")
    n = W.shape[0]
    if k < 1 or k >= n:
        raise ConfigError(f"neighbour count k={k} must satisfy 1 <= k < n={n}")
    ranked = np.where(np.eye(n, dtype=bool), -np.inf, W)
    order = np.argsort(-ranked, axis=1, kind="stable")[:, :k]
    keep = np.zeros((n, n), dtype=bool)
    keep[np.repeat(np.arange(n), k), order.ravel()] = True
    keep |= keep.T
    A = np.where(keep & (W > 0), W, 0.0)
    np.fill_diagonal(A, 0.0)
    return normalize_shift(A)


def save_graph(graph, path):
    """Text format: ``n kind`` header, then ``i j w`` for each nonzero i <= j."""
    S = graph.shift
    lines = [f"{graph.n} {graph.kind}"]
    rows, cols = np.nonzero(np.triu(S))
    for i, j in zip(rows, cols):
        lines.append(f"{i} {j} {S[i, j]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_graph(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"graph file not found: {path}")
    lines = path.read_text().splitlines()
    try:
        n_str, kind = lines[0].split()
        n = int(n_str)
        S = np.zeros((n, n))
        for line in lines[1:]:
            if not line.strip():
                continue
            i, j, w = line.split()
            i, j = int(i), int(j)
            S[i, j] = S[j, i] = float(w)
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed graph file {path}: {exc}") from exc
    if np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_TOL:
        raise DataError(f"graph file {path} is not symmetric")
    return Graph(S, kind)
