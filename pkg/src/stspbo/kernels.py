"""Inner loops of the Blahut-Arimoto iteration.

Each kernel has a loop form (compiled by numba when enabled) and a
vectorized numpy form. ``ba_iterate`` and ``lagrangian_terms`` dispatch to
whichever backend ``stspbo._accel`` selected at import.
"""
import math

import numpy as np

from ._accel import HAS_NUMBA, njit


@njit
def _lagrangian_loop(dist, beta, weights, p):
    n_rows, n_cols = p.shape
    q = np.zeros(n_cols)
    for z in range(n_rows):
        for x in range(n_cols):
            q[x] += weights[z] * p[z, x]
    info = 0.0
    distortion = 0.0
    for z in range(n_rows):
        wz = weights[z]
        if wz == 0.0:
            continue
        for x in range(n_cols):
            pzx = p[z, x]
            if pzx > 0.0:
                # q[x] can underflow to 0 under a subnormal p; such terms are negligible
                if q[x] > 0.0:
                    info += wz * pzx * math.log(pzx / q[x])
                distortion += wz * pzx * dist[z, x]
    return info, distortion


@njit
def _ba_loop(dist, beta, weights, p, k_max, tol, track):
    n_rows, n_cols = p.shape
    # Row-max-shifted exponentials: every row has an entry equal to 1, so the
    # only underflow is of terms negligible next to that entry.
    expd = np.empty((n_rows, n_cols))
    for z in range(n_rows):
        lo = np.inf
        for x in range(n_cols):
            if dist[z, x] < lo:
                lo = dist[z, x]
        for x in range(n_cols):
            expd[z, x] = math.exp(-beta * (dist[z, x] - lo))
    q = np.zeros(n_cols)
    for z in range(n_rows):
        for x in range(n_cols):
            q[x] += weights[z] * p[z, x]
    q_next = np.empty(n_cols)
    row = np.empty(n_cols)
    history = np.full(k_max + 1, np.nan)
    if track:
        info, distortion = _lagrangian_loop(dist, beta, weights, p)
        history[0] = info + beta * distortion
    iterations = 0
    delta = np.inf
    for k in range(k_max):
        for x in range(n_cols):
            q_next[x] = 0.0
        delta = 0.0
        for z in range(n_rows):
            total = 0.0
            for x in range(n_cols):
                v = expd[z, x] * q[x]
                row[x] = v
                total += v
            if not (total > 0.0):
                # Every supported term underflowed: redo this row in log space.
                top = -np.inf
                for x in range(n_cols):
                    v = (math.log(q[x]) if q[x] > 0.0 else -np.inf) - beta * dist[z, x]
                    row[x] = v
                    if v > top:
                        top = v
                total = 0.0
                for x in range(n_cols):
                    e = math.exp(row[x] - top)
                    row[x] = e
                    total += e
            wz = weights[z]
            inv_total = 1.0 / total
            for x in range(n_cols):
                new = row[x] * inv_total
                diff = abs(new - p[z, x])
                if diff > delta:
                    delta = diff
                p[z, x] = new
                q_next[x] += wz * new
        for x in range(n_cols):
            q[x] = q_next[x]
        iterations = k + 1
        if track:
            info, distortion = _lagrangian_loop(dist, beta, weights, p)
            history[iterations] = info + beta * distortion
        if delta < tol:
            break
    return p, iterations, delta, history


def _lagrangian_numpy(dist, beta, weights, p):
    q = weights @ p
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where((p > 0) & (q[None, :] > 0), np.log(p / q[None, :]), 0.0)
    wp = weights[:, None] * p
    return float((wp * logs).sum()), float((wp * dist).sum())


def _ba_numpy(dist, beta, weights, p, k_max, tol, track):
    expd = np.exp(-beta * (dist - dist.min(axis=1, keepdims=True)))
    history = np.full(k_max + 1, np.nan)
    if track:
        info, distortion = _lagrangian_numpy(dist, beta, weights, p)
        history[0] = info + beta * distortion
    iterations = 0
    delta = np.inf
    for k in range(k_max):
        q = weights @ p
        new = expd * q[None, :]
        total = new.sum(axis=1, keepdims=True)
        bad = ~(total[:, 0] > 0)
        if bad.any():
            with np.errstate(divide="ignore"):
                logits = np.log(q)[None, :] - beta * dist[bad]
            logits -= logits.max(axis=1, keepdims=True)
            new[bad] = np.exp(logits)
            total[bad] = new[bad].sum(axis=1, keepdims=True)
        new /= total
        delta = float(np.abs(new - p).max())
        p = new
        iterations = k + 1
        if track:
            info, distortion = _lagrangian_numpy(dist, beta, weights, p)
            history[iterations] = info + beta * distortion
        if delta < tol:
            break
    return p, iterations, delta, history


def ba_iterate(dist, beta, weights, p, k_max, tol, track=False, backend=None):
    """Run up to ``k_max`` marginal/conditional sweeps starting from ``p``.

    Returns ``(p, iterations, final_delta, history)`` where ``history[k]`` is
    the Lagrangian after ``k`` sweeps when ``track`` is set (NaN otherwise).
    The caller's ``p`` is not modified.
    """
    use_numba = HAS_NUMBA if backend is None else backend == "numba"
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    p = np.array(p, dtype=np.float64, order="C")
    if use_numba:
        p, it, delta, hist = _ba_loop(dist, float(beta), weights, p, int(k_max), float(tol), bool(track))
    else:
        p, it, delta, hist = _ba_numpy(dist, float(beta), weights, p, int(k_max), float(tol), bool(track))
    return p, int(it), float(delta), hist


def lagrangian_terms(dist, beta, weights, p, backend=None):
    """Mutual-information and distortion terms ``(I, D)`` of a target."""
    use_numba = HAS_NUMBA if backend is None else backend == "numba"
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    p = np.ascontiguousarray(p, dtype=np.float64)
    if use_numba:
        info, distortion = _lagrangian_loop(dist, float(beta), weights, p)
        return float(info), float(distortion)
    return _lagrangian_numpy(dist, beta, weights, p)
