"""Independent numeric oracle: six-term Koszul formula with central differences.

Pi and g are plain numpy callables here, so nothing is shared with the
package except numpy. Ricci uses an explicit orthonormal coframe built from
an eigen-decomposition of the cometric, with signature factors.
"""
from __future__ import annotations

import numpy as np

H = 1e-5


def _d(fn, p, a, h=H):
    e = np.zeros_like(p)
    e[a] = h
    return (fn(p + e) - fn(p - e)) / (2 * h)


def gamma(Pi, g, p):
    """``Gamma[i, j, l]`` with ``D_{dx^i} dx^j = Gamma[i, j, l] dx^l``."""
    p = np.asarray(p, float)
    d = len(p)
    P, G = Pi(p), g(p)
    dP = np.stack([_d(Pi, p, a) for a in range(d)], axis=-1)  # dP[i, j, a]
    dG = np.stack([_d(g, p, a) for a in range(d)], axis=-1)

    def sharp_of(i, M):  # sharp(dx^i) applied to entry M[..] with derivative array dM[..., a]
        return sum(P[i, a] * M[a] for a in range(d))

    rhs = np.zeros((d, d, d))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                t = (sharp_of(i, dG[j, k]) + sharp_of(j, dG[i, k]) - sharp_of(k, dG[i, j])
                     + sum(dP[i, j, a] * G[a, k] for a in range(d))
                     - sum(dP[j, k, a] * G[a, i] for a in range(d))
                     + sum(dP[k, i, a] * G[a, j] for a in range(d)))
                rhs[i, j, k] = 0.5 * t
    return rhs @ np.linalg.inv(G)


def riemann(Pi, g, p):
    """``R[i, j, k, m]`` with ``R(dx^i, dx^j) dx^k = R[i, j, k, m] dx^m``, from the definition."""
    p = np.asarray(p, float)
    d = len(p)
    P = Pi(p)
    dP = np.stack([_d(Pi, p, a) for a in range(d)], axis=-1)
    Gm = gamma(Pi, g, p)
    dGm = np.stack([_d(lambda q: gamma(Pi, g, q), p, a, 1e-4) for a in range(d)], axis=-1)

    R = np.zeros((d, d, d, d))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                # D_i (Gamma[j,k,l] dx^l) = Gamma[j,k,l] Gamma[i,l,m] + sharp(dx^i)(Gamma[j,k,m])
                dij = Gm[j, k] @ Gm[i] + np.array([P[i] @ dGm[j, k, m] for m in range(d)])
                dji = Gm[i, k] @ Gm[j] + np.array([P[j] @ dGm[i, k, m] for m in range(d)])
                br = dP[i, j] @ Gm[:, k, :]  # D_{[dx^i, dx^j]} dx^k with [dx^i, dx^j] = dPi^{ij}
                R[i, j, k] = dij - dji - br
    return R


def ricci(Pi, g, p):
    """``Ric(dx^a, dx^b) = sum_i eps_i g(R(dx^a, eta_i) eta_i, dx^b)`` over an orthonormal coframe."""
    G = g(np.asarray(p, float))
    R = riemann(Pi, g, p)
    w, V = np.linalg.eigh(G)
    eta = V / np.sqrt(np.abs(w))  # columns: components of eta_i in the coframe
    eps = np.sign(w)
    d = len(w)
    out = np.zeros((d, d))
    for i in range(d):
        e = eta[:, i]
        # R(dx^a, eta) eta = sum_{j,k} e_j e_k R[a, j, k, :]
        r = np.einsum("j,k,ajkm->am", e, e, R)
        out += eps[i] * r @ G
    return out


def scalar(Pi, g, p):
    G = g(np.asarray(p, float))
    w, V = np.linalg.eigh(G)
    eta = V / np.sqrt(np.abs(w))
    Ric = ricci(Pi, g, p)
    return float(sum(np.sign(w[i]) * eta[:, i] @ Ric @ eta[:, i] for i in range(len(w))))
