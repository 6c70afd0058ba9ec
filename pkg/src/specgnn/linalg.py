"""Dense symmetric linear algebra used throughout the package.

Everything here works on plain ``numpy`` float64 arrays.  The eigensolver is a
cyclic Jacobi method with round-robin (tournament) ordering, which lets the
``n/2`` disjoint rotations of each round be applied as vectorised numpy
operations.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, SymmetryError

SYMMETRY_TOL = 1e-12
JACOBI_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix.

    ``eigenvalues`` are ascending and ``eigenvectors[:, i]`` belongs to
    ``eigenvalues[i]``.  Each eigenvector is signed so that its entry of
    largest magnitude (first one on ties) is non-negative.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self):
        return self.eigenvalues.shape[0]

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def as_square(A, name="matrix"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def check_symmetric(A, tol=SYMMETRY_TOL, name="matrix"):
    A = as_square(A, name)
    if A.size and np.max(np.abs(A - A.T)) > tol:
        raise SymmetryError(
            f"{name} is not symmetric (max asymmetry {np.max(np.abs(A - A.T)):.3e})"
        )
    return A


def _round_robin(n):
    """Pairings for one sweep: every (p, q) with p < q appears exactly once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        P, Q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                P.append(min(a, b))
                Q.append(max(a, b))
        rounds.append((np.array(P, dtype=np.intp), np.array(Q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(A):
    off = A - np.diag(np.diag(A))
    return np.sqrt(np.sum(off * off))


def fix_signs(V):
    """Flip columns so the largest-magnitude entry of each is non-negative."""
    V = np.array(V, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def jacobi_eigh(A, tol=JACOBI_REL_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a dense symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix (asymmetry at most 1e-12 entrywise).
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm drops below
        ``tol * ||A||_F``.
    max_sweeps : int
        Iteration cap; exceeding it raises :class:`ConvergenceError`.

    Returns
    -------
    EigenDecomposition
        Ascending eigenvalues with sign-normalised orthonormal eigenvectors.
    """
    A = check_symmetric(A)
    n = A.shape[0]
    if n == 0:
        raise DimensionError("matrix must have at least one row")
    # average the two triangles so the iteration starts exactly symmetric
    D = 0.5 * (A + A.T)
    V = np.eye(n)
    threshold = tol * np.linalg.norm(D)
    rounds = _round_robin(n)

    sweep = 0
    off = _off_norm(D)
    while off > threshold:
        if sweep >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {off:.3e})",
                residual=off,
            )
        for P, Q in rounds:
            apq = D[P, Q]
            active = apq != 0.0
            if not np.any(active):
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            app = D[P, P]
            aqq = D[Q, Q]
            with np.errstate(over="ignore", divide="ignore"):
                tau = (aqq - app) / (2.0 * apq)
                t = np.where(
                    np.isfinite(tau),
                    np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau)),
                    0.0,
                )
            t = np.where(tau == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            Dp = D[:, P]
            Dq = D[:, Q]
            D[:, P] = Dp * c - Dq * s
            D[:, Q] = Dp * s + Dq * c
            Dp = D[P, :]
            Dq = D[Q, :]
            D[P, :] = c[:, None] * Dp - s[:, None] * Dq
            D[Q, :] = s[:, None] * Dp + c[:, None] * Dq
            D[P, Q] = 0.0
            D[Q, P] = 0.0

            Vp = V[:, P]
            Vq = V[:, Q]
            V[:, P] = Vp * c - Vq * s
            V[:, Q] = Vp * s + Vq * c
        sweep += 1
        off = _off_norm(D)

    w = np.diag(D).copy()
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], fix_signs(V[:, order]))


def operator_norm(A, rtol=1e-10, max_iter=100_000):
    """Spectral norm (largest singular value) by power iteration on ``A^T A``."""
    A = as_square(A)
    n = A.shape[0]
    if n == 0 or not np.any(A):
        return 0.0
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = A @ v
        sigma_new = np.linalg.norm(w)
        if sigma_new == 0.0:
            # start vector landed in the null space; a different one is needed
            v = np.random.default_rng(1).standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        v = A.T @ w
        v /= np.linalg.norm(v)
        if abs(sigma_new - sigma) <= rtol * sigma_new:
            return float(sigma_new)
        sigma = sigma_new
    return float(sigma)


def gft(V, x):
    """Graph Fourier transform ``V^T x``."""
    V = as_square(V, "eigenvector matrix")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != V.shape[0]:
        raise DimensionError(f"signal length {x.shape[0]} != {V.shape[0]}")
    return V.T @ x


def inverse_gft(V, xhat):
    V = as_square(V, "eigenvector matrix")
    xhat = np.asarray(xhat, dtype=np.float64)
    if xhat.shape[0] != V.shape[0]:
        raise DimensionError(f"coefficient length {xhat.shape[0]} != {V.shape[0]}")
    return V @ xhat


def shift_power_apply(S, k, x, trace=False):
    """Compute ``S^k x`` with ``k`` successive products.

    ``x`` may carry trailing batch axes; its first axis must have length n.
    With ``trace=True`` the list ``[S^0 x, ..., S^k x]`` is returned instead.
    """
    S = np.asarray(S, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if k < 0 or int(k) != k:
        raise DimensionError(f"power must be a non-negative integer, got {k}")
    if S.ndim != 2 or S.shape[0] != S.shape[1] or x.shape[0] != S.shape[1]:
        raise DimensionError(f"cannot apply {S.shape} operator to signal {x.shape}")
    shape = x.shape
    cur = x.reshape(shape[0], -1)
    out = [x]
    for _ in range(int(k)):
        cur = S @ cur
        out.append(cur.reshape(shape))
    return out if trace else out[-1]
