"""Compiled single-player kernels behind :mod:`mpmp.games`.

Inputs are raw arrays: ``S`` codes (N x K), ``D`` receivers (N x K),
``P`` powers (K), ``G`` squared gains (K x receivers), ``a`` assignment,
``sigma2`` noise variance. No validation happens here; the wrappers in
:mod:`mpmp.games` check preconditions first.
"""

import numpy as np
from numba import njit

DEGENERACY_RTOL = 1e-10
SIGN_THRESHOLD = 1e-9


@njit(cache=True)
def weighted_gram(S, w, diag):
    """``diag * I + sum_j w_j s_j s_j^T``, exactly symmetric."""
    N, K = S.shape
    m = np.zeros((N, N))
    for j in range(K):
        wj = w[j]
        if wj != 0.0:
            for r in range(N):
                sr = wj * S[r, j]
                for c in range(r, N):
                    m[r, c] += sr * S[c, j]
    for r in range(N):
        m[r, r] += diag
        for c in range(r + 1, N):
            m[c, r] = m[r, c]
    return m


@njit(cache=True)
def _dot_col(u, i, x):
    acc = 0.0
    for r in range(u.shape[0]):
        acc += u[r, i] * x[r]
    return acc


@njit(cache=True)
def min_eig_response(m, current):
    """Unit minimiser of the quadratic form, continuous in ``current`` (see numerics)."""
    w, u = np.linalg.eigh(m)
    N = m.shape[0]
    scale = max(abs(w[0]), abs(w[N - 1]), 1e-300)
    threshold = w[0] + DEGENERACY_RTOL * scale
    n_cluster = 0
    for i in range(N):
        if w[i] <= threshold:
            n_cluster += 1
    v = np.empty(N)
    if n_cluster > 1:
        proj = np.zeros(N)
        for i in range(n_cluster):
            c = _dot_col(u, i, current)
            for r in range(N):
                proj[r] += c * u[r, i]
        norm = np.sqrt(np.sum(proj * proj))
        if norm > 1e-8:
            return proj / norm
        for r in range(N):
            v[r] = u[r, 0]
        for r in range(N):
            if abs(v[r]) > SIGN_THRESHOLD:
                if v[r] < 0:
                    v = -v
                break
        return v
    sign = 1.0 if _dot_col(u, 0, current) >= 0 else -1.0
    for r in range(N):
        v[r] = sign * u[r, 0]
    return v


@njit(cache=True)
def interference_weights(P, G, a, k):
    K = P.shape[0]
    w = np.empty(K)
    ell = a[k]
    for j in range(K):
        w[j] = P[j] * G[j, ell]
    w[k] = 0.0
    return w


@njit(cache=True)
def greedy_ia_response(S, P, G, a, sigma2, k):
    m = weighted_gram(S, interference_weights(P, G, a, k), sigma2)
    return min_eig_response(m, S[:, k].copy())


@njit(cache=True)
def menon_matrix(S, P, G, a, sigma2, k):
    K = P.shape[0]
    own_k = P[k] * G[k, a[k]]
    w = np.empty(K)
    for j in range(K):
        own_j = P[j] * G[j, a[j]]
        w[j] = P[j] * G[j, a[k]] / own_k + P[k] * G[k, a[j]] / own_j
    w[k] = 0.0
    return weighted_gram(S, w, sigma2 / own_k)


@njit(cache=True)
def sinr_potential_matrix(S, P, G, a, sigma2, k):
    K = P.shape[0]
    own_k = G[k, a[k]]
    w = np.empty(K)
    for j in range(K):
        w[j] = P[j] * (G[j, a[k]] + G[k, a[j]] * G[j, a[j]] / own_k)
    w[k] = 0.0
    return weighted_gram(S, w, sigma2)


@njit(cache=True)
def menon_response(S, P, G, a, sigma2, k):
    return min_eig_response(menon_matrix(S, P, G, a, sigma2, k), S[:, k].copy())


@njit(cache=True)
def sinr_potential_response(S, P, G, a, sigma2, k):
    return min_eig_response(sinr_potential_matrix(S, P, G, a, sigma2, k), S[:, k].copy())


@njit(cache=True)
def lmmse_receiver(S, P, G, a, sigma2, k):
    ell = a[k]
    K = P.shape[0]
    w = np.empty(K)
    for j in range(K):
        w[j] = P[j] * G[j, ell]
    x = np.linalg.solve(weighted_gram(S, w, sigma2), S[:, k].copy())
    return np.sqrt(P[k] * G[k, ell]) * x


@njit(cache=True)
def lmmse_receivers(S, P, G, a, sigma2):
    N, K = S.shape
    out = np.empty((N, K))
    n_rx = G.shape[1]
    w = np.empty(K)
    for ell in range(n_rx):
        users = np.flatnonzero(a == ell)
        if users.size == 0:
            continue
        for j in range(K):
            w[j] = P[j] * G[j, ell]
        C = weighted_gram(S, w, sigma2)
        rhs = np.empty((N, users.size))
        for i in range(users.size):
            rhs[:, i] = S[:, users[i]]
        X = np.linalg.solve(C, rhs)
        for i in range(users.size):
            k = users[i]
            amp = np.sqrt(P[k] * G[k, ell])
            for r in range(N):
                out[r, k] = amp * X[r, i]
    return out


@njit(cache=True)
def lmmse_sinr_per_watt(S, P, G, a, sigma2, k):
    """``h^2 s^T C_{-k}^{-1} s``: LMMSE SINR of user ``k`` divided by its power."""
    s = S[:, k].copy()
    x = np.linalg.solve(weighted_gram(S, interference_weights(P, G, a, k), sigma2), s)
    return G[k, a[k]] * np.sum(s * x)


@njit(cache=True)
def mf_sinr_per_watt(S, P, G, a, sigma2, k):
    s = S[:, k].copy()
    m = weighted_gram(S, interference_weights(P, G, a, k), sigma2)
    ss = np.sum(s * s)
    return G[k, a[k]] * ss * ss / np.sum(s * (m @ s))


@njit(cache=True)
def _norm_minus_one(beta, mu, t):
    acc = 0.0
    for i in range(beta.shape[0]):
        q = beta[i] / (mu[i] + t)
        acc += q * q
    return np.sqrt(acc) - 1.0


@njit(cache=True)
def tmse_code_response(S, D, P, G, a, k):
    """Unit minimiser of ``s^T Dk s - 2 b^T s`` (see games.tmse_code_best_response)."""
    N, K = S.shape
    c = np.empty(K)
    for ell in range(K):
        c[ell] = P[k] * G[k, a[ell]]
    Dk = weighted_gram(D, c, 0.0)
    b = np.sqrt(P[k] * G[k, a[k]]) * D[:, k]
    scale = np.sqrt(np.sum(b * b))
    mu, U = np.linalg.eigh(Dk)
    mu = mu / scale
    beta = (U.T @ b) / scale

    t_lo = -mu[0] + 1e-12 * (1.0 + abs(mu[0]))
    if _norm_minus_one(beta, mu, t_lo) > 0:
        offset = 1.0
        while _norm_minus_one(beta, mu, -mu[0] + offset) > 0:
            offset *= 2.0
        lo = t_lo
        hi = -mu[0] + offset
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo <= 1e-12 * max(1.0, abs(mid)):
                break
            if _norm_minus_one(beta, mu, mid) > 0:
                lo = mid
            else:
                hi = mid
        t = 0.5 * (lo + hi)
        s = U @ (beta / (mu + t))
    else:
        coef = np.zeros(N)
        spread = 1e-10 * max(1.0, abs(mu[N - 1]))
        acc = 0.0
        for i in range(N):
            if mu[i] > mu[0] + spread:
                coef[i] = beta[i] / (mu[i] - mu[0])
                acc += coef[i] * coef[i]
        tail = np.sqrt(max(0.0, 1.0 - acc))
        if _dot_col(U, 0, S[:, k].copy()) < 0:
            tail = -tail
        coef[0] += tail
        s = U @ coef
    return s / np.sqrt(np.sum(s * s))


@njit(cache=True)
def mmse_pair_response(S, P, G, a, sigma2, k):
    """LMMSE receiver of user ``k`` and its direction as the new code."""
    d = lmmse_receiver(S, P, G, a, sigma2, k)
    return d, d / np.sqrt(np.sum(d * d))


GREEDY_IA, GREEDY_MMSE, MENON, SINR_POTENTIAL, TMSE_MIN = range(5)


@njit(cache=True)
def code_round(game, S, D, P, G, a, sigma2):
    """One round-robin pass of a code game, updating ``S`` (and ``D``) in place."""
    K = S.shape[1]
    for k in range(K):
        if game == GREEDY_IA:
            S[:, k] = greedy_ia_response(S, P, G, a, sigma2, k)
        elif game == GREEDY_MMSE:
            d, s = mmse_pair_response(S, P, G, a, sigma2, k)
            D[:, k] = d
            S[:, k] = s
        elif game == MENON:
            S[:, k] = menon_response(S, P, G, a, sigma2, k)
        elif game == SINR_POTENTIAL:
            S[:, k] = sinr_potential_response(S, P, G, a, sigma2, k)
        else:
            D[:, k] = lmmse_receiver(S, P, G, a, sigma2, k)
            S[:, k] = tmse_code_response(S, D, P, G, a, k)
