"""Fused EM iteration kernel, numba-compiled when available.

Replicates the numpy reference updates in :mod:`gmmdr.mixture` family by
family; the public entry point is :func:`run_em`, which dispatches to the
compiled kernel unless numba is missing or ``GMMDR_DISABLE_NUMBA`` is set.
Status codes instead of exceptions cross the nopython boundary:
0 = ok, 1 = weight collapse, 2 = persistent sub-floor covariance,
3 = non-finite log-likelihood, 4 = singular single-component covariance.
"""

from __future__ import annotations

import math
import os

import numpy as np

MODEL_CODES = {
    "E": 0,
    "EII": 0,
    "V": 1,
    "VII": 1,
    "EEI": 2,
    "VEI": 3,
    "EEE": 4,
    "EEV": 5,
    "VEV": 6,
    "VVV": 7,
}

STATUS_OK = 0
STATUS_WEIGHT_COLLAPSE = 1
STATUS_FLOOR = 2
STATUS_NONFINITE = 3
STATUS_SINGULAR_G1 = 4

_INNER_MAX_ITER = 20
_INNER_TOL = 1e-8
_LOG_2PI = math.log(2.0 * math.pi)


def _em_iterate(X, resp, code, max_iter, rel_tol, floor):  # pragma: no cover
    """Full EM loop; see run_em for the contract.  Numba-compilable body."""
    n, p = X.shape
    G = resp.shape[1]
    weights = np.zeros(G)
    means = np.zeros((G, p))
    covs = np.zeros((G, p, p))
    shape = np.ones(p)
    have_shape = False
    path = np.zeros(max_iter + 2)
    loglik = -np.inf
    prev = -np.inf
    converged = False
    iterations = 0
    n_path = 0
    strikes = 0

    for it in range(max_iter + 2):
        # ---- M step ----
        nk = np.zeros(G)
        for i in range(n):
            for g in range(G):
                nk[g] += resp[i, g]
        for g in range(G):
            if nk[g] < 0.5:
                return (weights, means, covs, resp, path, n_path, converged,
                        iterations, STATUS_WEIGHT_COLLAPSE)
        for g in range(G):
            weights[g] = nk[g] / n
            for j in range(p):
                acc = 0.0
                for i in range(n):
                    acc += resp[i, g] * X[i, j]
                means[g, j] = acc / nk[g]
        W = np.zeros((G, p, p))
        for g in range(G):
            for i in range(n):
                r = resp[i, g]
                for j in range(p):
                    dj = X[i, j] - means[g, j]
                    rdj = r * dj
                    for l in range(j, p):
                        W[g, j, l] += rdj * (X[i, l] - means[g, l])
            for j in range(p):
                for l in range(j + 1, p):
                    W[g, l, j] = W[g, j, l]

        min_eig = np.inf
        if code == 0:  # shared spherical
            tr = 0.0
            for g in range(G):
                for j in range(p):
                    tr += W[g, j, j]
            lam = tr / (n * p)
            min_eig = lam
            lam = max(lam, floor)
            for g in range(G):
                for j in range(p):
                    for l in range(p):
                        covs[g, j, l] = lam if j == l else 0.0
        elif code == 1:  # per-component spherical
            for g in range(G):
                tr = 0.0
                for j in range(p):
                    tr += W[g, j, j]
                lam = tr / (nk[g] * p)
                if lam < min_eig:
                    min_eig = lam
                lam = max(lam, floor)
                for j in range(p):
                    for l in range(p):
                        covs[g, j, l] = lam if j == l else 0.0
        elif code == 2:  # shared diagonal
            for j in range(p):
                acc = 0.0
                for g in range(G):
                    acc += W[g, j, j]
                v = acc / n
                if v < min_eig:
                    min_eig = v
                v = max(v, floor)
                for g in range(G):
                    for l in range(p):
                        covs[g, j, l] = v if j == l else 0.0
        elif code == 3:  # per-component volume, shared diagonal shape
            Wd = np.zeros((G, p))
            for g in range(G):
                for j in range(p):
                    Wd[g, j] = W[g, j, j]
            if not have_shape:
                tot = np.zeros(p)
                for j in range(p):
                    for g in range(G):
                        tot[j] += Wd[g, j]
                    tot[j] = max(tot[j], 1e-300)
                logmean = 0.0
                for j in range(p):
                    logmean += math.log(tot[j])
                logmean /= p
                for j in range(p):
                    shape[j] = math.exp(math.log(tot[j]) - logmean)
                have_shape = True
            lam_g = np.full(G, np.nan)
            for _ in range(_INNER_MAX_ITER):
                lam_new = np.zeros(G)
                for g in range(G):
                    acc = 0.0
                    for j in range(p):
                        acc += Wd[g, j] / shape[j]
                    lam_new[g] = max(acc / (p * nk[g]), 1e-300)
                pooled = np.zeros(p)
                for j in range(p):
                    for g in range(G):
                        pooled[j] += Wd[g, j] / lam_new[g]
                    pooled[j] = max(pooled[j], 1e-300)
                logmean = 0.0
                for j in range(p):
                    logmean += math.log(pooled[j])
                logmean /= p
                done = True
                for g in range(G):
                    if not (abs(lam_new[g] - lam_g[g]) <= _INNER_TOL * (1 + abs(lam_new[g]))):
                        done = False
                for j in range(p):
                    shape[j] = math.exp(math.log(pooled[j]) - logmean)
                lam_g = lam_new
                if done:
                    break
            smin = shape[0]
            for j in range(p):
                if shape[j] < smin:
                    smin = shape[j]
            lmin = lam_g[0]
            for g in range(G):
                if lam_g[g] < lmin:
                    lmin = lam_g[g]
            min_eig = lmin * smin
            for g in range(G):
                lam = max(lam_g[g], floor / smin)
                for j in range(p):
                    for l in range(p):
                        covs[g, j, l] = lam * shape[j] if j == l else 0.0
        elif code == 4:  # shared full covariance
            S = np.zeros((p, p))
            for g in range(G):
                for j in range(p):
                    for l in range(p):
                        S[j, l] += W[g, j, l]
            for j in range(p):
                for l in range(p):
                    S[j, l] /= n
            vals, vecs = np.linalg.eigh(S)
            min_eig = vals[0]
            if min_eig < floor:
                for j in range(p):
                    if vals[j] < floor:
                        vals[j] = floor
                S = vecs @ np.diag(vals) @ vecs.T
            for g in range(G):
                for j in range(p):
                    for l in range(p):
                        covs[g, j, l] = 0.5 * (S[j, l] + S[l, j])
        elif code == 5 or code == 6:  # shared shape, varying orientation
            omega = np.zeros((G, p))
            rots = np.zeros((G, p, p))
            for g in range(G):
                Wg = np.zeros((p, p))
                for j in range(p):
                    for l in range(p):
                        Wg[j, l] = 0.5 * (W[g, j, l] + W[g, l, j])
                vals, vecs = np.linalg.eigh(Wg)
                for j in range(p):  # descending order
                    v = vals[p - 1 - j]
                    omega[g, j] = v if v > 0.0 else 0.0
                    for l in range(p):
                        rots[g, l, j] = vecs[l, p - 1 - j]
            if code == 5:
                comb = np.zeros(p)
                for j in range(p):
                    for g in range(G):
                        comb[j] += omega[g, j]
                    comb[j] /= n
                min_eig = comb[0]
                for j in range(p):
                    if comb[j] < min_eig:
                        min_eig = comb[j]
                    comb[j] = max(comb[j], floor)
                for g in range(G):
                    for j in range(p):
                        for l in range(j, p):
                            acc = 0.0
                            for m in range(p):
                                acc += rots[g, j, m] * comb[m] * rots[g, l, m]
                            covs[g, j, l] = acc
                            covs[g, l, j] = acc
            else:
                om = np.zeros((G, p))
                for g in range(G):
                    for j in range(p):
                        om[g, j] = max(omega[g, j], 1e-300)
                if not have_shape:
                    tot = np.zeros(p)
                    for j in range(p):
                        for g in range(G):
                            tot[j] += om[g, j]
                        tot[j] = max(tot[j], 1e-300)
                    logmean = 0.0
                    for j in range(p):
                        logmean += math.log(tot[j])
                    logmean /= p
                    for j in range(p):
                        shape[j] = math.exp(math.log(tot[j]) - logmean)
                    have_shape = True
                lam_g = np.full(G, np.nan)
                for _ in range(_INNER_MAX_ITER):
                    lam_new = np.zeros(G)
                    for g in range(G):
                        acc = 0.0
                        for j in range(p):
                            acc += om[g, j] / shape[j]
                        lam_new[g] = max(acc / (p * nk[g]), 1e-300)
                    pooled = np.zeros(p)
                    for j in range(p):
                        for g in range(G):
                            pooled[j] += om[g, j] / lam_new[g]
                        pooled[j] = max(pooled[j], 1e-300)
                    logmean = 0.0
                    for j in range(p):
                        logmean += math.log(pooled[j])
                    logmean /= p
                    done = True
                    for g in range(G):
                        if not (abs(lam_new[g] - lam_g[g]) <= _INNER_TOL * (1 + abs(lam_new[g]))):
                            done = False
                    for j in range(p):
                        shape[j] = math.exp(math.log(pooled[j]) - logmean)
                    lam_g = lam_new
                    if done:
                        break
                smin = shape[0]
                for j in range(p):
                    if shape[j] < smin:
                        smin = shape[j]
                lmin = lam_g[0]
                for g in range(G):
                    if lam_g[g] < lmin:
                        lmin = lam_g[g]
                min_eig = lmin * smin
                for g in range(G):
                    lam = max(lam_g[g], floor / smin)
                    for j in range(p):
                        for l in range(j, p):
                            acc = 0.0
                            for m in range(p):
                                acc += rots[g, j, m] * (lam * shape[m]) * rots[g, l, m]
                            covs[g, j, l] = acc
                            covs[g, l, j] = acc
        else:  # code == 7, unconstrained
            for g in range(G):
                Cg = np.zeros((p, p))
                for j in range(p):
                    for l in range(p):
                        Cg[j, l] = 0.5 * (W[g, j, l] + W[g, l, j]) / nk[g]
                vals, vecs = np.linalg.eigh(Cg)
                if vals[0] < min_eig:
                    min_eig = vals[0]
                if vals[0] < floor:
                    for j in range(p):
                        if vals[j] < floor:
                            vals[j] = floor
                    Cg = vecs @ np.diag(vals) @ vecs.T
                for j in range(p):
                    for l in range(p):
                        covs[g, j, l] = 0.5 * (Cg[j, l] + Cg[l, j])

        if min_eig < floor:
            if G == 1:
                return (weights, means, covs, resp, path, n_path, converged,
                        iterations, STATUS_SINGULAR_G1)
            strikes += 1
            if strikes >= 2:
                return (weights, means, covs, resp, path, n_path, converged,
                        iterations, STATUS_FLOOR)
        else:
            strikes = 0

        # ---- E step ----
        logp = np.zeros((n, G))
        for g in range(G):
            L = np.linalg.cholesky(covs[g])
            half_logdet = 0.0
            for j in range(p):
                half_logdet += math.log(L[j, j])
            lw = math.log(weights[g])
            base = -0.5 * p * _LOG_2PI - half_logdet + lw
            for i in range(n):
                # forward substitution for y = L^-1 (x - mu)
                mahal = 0.0
                y = np.zeros(p)
                for j in range(p):
                    acc = X[i, j] - means[g, j]
                    for l in range(j):
                        acc -= L[j, l] * y[l]
                    yj = acc / L[j, j]
                    y[j] = yj
                    mahal += yj * yj
                logp[i, g] = base - 0.5 * mahal
        loglik = 0.0
        for i in range(n):
            top = logp[i, 0]
            for g in range(1, G):
                if logp[i, g] > top:
                    top = logp[i, g]
            total = 0.0
            for g in range(G):
                resp[i, g] = math.exp(logp[i, g] - top)
                total += resp[i, g]
            for g in range(G):
                resp[i, g] /= total
            loglik += math.log(total) + top
        if not np.isfinite(loglik):
            return (weights, means, covs, resp, path, n_path, converged,
                    iterations, STATUS_NONFINITE)
        path[n_path] = loglik
        n_path += 1
        iterations = it
        if it > 0 and abs(loglik - prev) <= rel_tol * (1.0 + abs(loglik)):
            converged = True
            break
        if it == max_iter or G == 1:
            converged = G == 1
            break
        prev = loglik

    return weights, means, covs, resp, path, n_path, converged, iterations, STATUS_OK


def _lloyd_iterate(X, centers, n_iter):  # pragma: no cover
    """Lloyd's iterations from given centers; empty clusters get the point
    currently farthest from its assigned center.  Numba-compilable body."""
    n, p = X.shape
    G = centers.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n)
    counts = np.zeros(G, dtype=np.int64)
    for _ in range(n_iter):
        for i in range(n):
            best = 0
            best_d = np.inf
            for g in range(G):
                d = 0.0
                for j in range(p):
                    diff = X[i, j] - centers[g, j]
                    d += diff * diff
                if d < best_d:
                    best_d = d
                    best = g
            labels[i] = best
            dist[i] = best_d
        for g in range(G):
            counts[g] = 0
        for i in range(n):
            counts[labels[i]] += 1
        for g in range(G):
            if counts[g] == 0:
                far = 0
                far_d = -1.0
                for i in range(n):
                    if counts[labels[i]] > 1 and dist[i] > far_d:
                        far_d = dist[i]
                        far = i
                counts[labels[far]] -= 1
                labels[far] = g
                counts[g] = 1
                dist[far] = 0.0
        for g in range(G):
            for j in range(p):
                centers[g, j] = 0.0
        for i in range(n):
            g = labels[i]
            for j in range(p):
                centers[g, j] += X[i, j]
        for g in range(G):
            if counts[g] > 0:
                for j in range(p):
                    centers[g, j] /= counts[g]
    return labels


_COMPILED = None
_LLOYD = None
if os.environ.get("GMMDR_DISABLE_NUMBA", "") != "1":
    try:
        import numba

        _COMPILED = numba.njit(cache=True, fastmath=False)(_em_iterate)
        _LLOYD = numba.njit(cache=True, fastmath=False)(_lloyd_iterate)
    except ImportError:  # pragma: no cover
        _COMPILED = None
        _LLOYD = None


def kernel_available() -> bool:
    return _COMPILED is not None


def lloyd(X, centers, n_iter: int) -> np.ndarray:
    """Run Lloyd's algorithm; compiled when numba is available."""
    fn = _LLOYD if _LLOYD is not None else _lloyd_iterate
    return fn(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(centers, dtype=np.float64),
        n_iter,
    )


def run_em(X, resp0, model: str, max_iter: int, rel_tol: float, floor: float):
    """Run the fused EM loop; returns the kernel tuple (see module docstring)."""
    fn = _COMPILED if _COMPILED is not None else _em_iterate
    code = MODEL_CODES[model]
    resp = np.ascontiguousarray(resp0, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    return fn(X, resp.copy(), code, max_iter, rel_tol, floor)
