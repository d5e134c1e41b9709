"""Pure-numpy ARD Gram kernels (fallback for the compiled core)."""
import numpy as np


def ard_gram(X, rho, tau2):
    n, p = X.shape
    s = np.zeros((n, n))
    for j in range(p):
        d = X[:, j][:, None] - X[:, j][None, :]
        s += rho[j] * d * d
    out = tau2 * np.exp(-s)
    # exact symmetry and an exact tau2 diagonal, as in the compiled loop
    out = np.triu(out, 1)
    out = out + out.T
    out[np.diag_indices(n)] = tau2
    return out


def ard_cross(A, B, rho, tau2):
    s = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        d = A[:, j][:, None] - B[:, j][None, :]
        s += rho[j] * d * d
    return tau2 * np.exp(-s)
