"""Graph filters seen from the vertex side and from the frequency side."""

import numpy as np

from specgnn import filter_apply, jacobi_eigh, normalize_shift, sbm_generate, spectral_response
from specgnn.model import estimate_response_constants, stability_constant

# %% A small community graph, scaled so its spectrum sits in [-1, 1]
graph = normalize_shift(sbm_generate(30, 3, 0.8, 0.1, seed=1))
S = graph.shift
eig = jacobi_eigh(S)
lam, V = eig.eigenvalues, eig.eigenvectors
print("eigenvalues range:", lam[0].round(4), "...", lam[-1].round(4))
print("reconstruction error:", np.abs((V * lam) @ V.T - S).max())

# %% A low-pass filter: h(lambda) = 0.5 + 0.4 lambda + 0.1 lambda^2
h = np.array([0.5, 0.4, 0.1])
x = np.zeros(30)
x[0] = 1.0  # a spike at node 0

vertex = filter_apply(h, S, x)
spectral = V @ (spectral_response(h, lam) * (V.T @ x))
print("vertex vs spectral filtering:", np.linalg.norm(vertex - spectral))

# the spike spreads mostly inside its own community
for c in range(3):
    mass = np.abs(vertex[graph.communities == c]).sum()
    print(f"community {c}: filtered mass {mass:.3f}")

# %% Frequency response on a grid and the constants of the stability bound
grid = np.linspace(-1, 1, 9)
print("h(lambda) on a grid:", spectral_response(h, grid).round(3))
c = estimate_response_constants(h)
print(f"C_U = {c.C_U:.3f}, C_L = {c.C_L:.3f}")
print("bound constant for L=2, F=4:", stability_constant(30, 2, 4, c.C_L, c.C_U).round(1))
