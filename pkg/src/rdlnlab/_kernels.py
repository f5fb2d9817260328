"""Hot loops, numba-compiled when available.

Set ``RDLNLAB_DISABLE_NUMBA=1`` to force the pure-numpy implementations in
``_kernels_numpy`` (also used automatically when numba cannot be imported).
Both paths share signatures and semantics, including tie-breaking.
"""

import math
import os

import numpy as np

from . import _kernels_numpy

USE_NUMBA = os.environ.get("RDLNLAB_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False


def _jit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


@_jit
def _forward_nb(log_init, log_T, log_obs):
    n_frames, n = log_obs.shape
    cols = np.full((n_frames, n), -np.inf)
    scales = np.full(n_frames, -np.inf)
    a = np.empty(n)
    for i in range(n_frames):
        for j in range(n):
            if i == 0:
                a[j] = log_init[j] + log_obs[0, j]
                continue
            m = -np.inf
            for k in range(n):
                v = cols[i - 1, k] + log_T[k, j]
                if v > m:
                    m = v
            if m == -np.inf:
                a[j] = -np.inf
                continue
            s = 0.0
            for k in range(n):
                s += math.exp(cols[i - 1, k] + log_T[k, j] - m)
            a[j] = m + math.log(s) + log_obs[i, j]
        m = -np.inf
        for j in range(n):
            if a[j] > m:
                m = a[j]
        if m == -np.inf or m != m or m == np.inf:
            break
        s = 0.0
        for j in range(n):
            s += math.exp(a[j] - m)
        c = m + math.log(s)
        scales[i] = c
        for j in range(n):
            cols[i, j] = a[j] - c
    return cols, scales


@_jit
def _viterbi_nb(log_init, log_T, log_obs):
    n_frames, n = log_obs.shape
    back = np.zeros((n_frames, n), dtype=np.int64)
    delta = np.empty(n)
    nxt = np.empty(n)
    for j in range(n):
        delta[j] = log_init[j] + log_obs[0, j]
    for i in range(1, n_frames):
        for j in range(n):
            best = -np.inf
            arg = 0
            for k in range(n):
                v = delta[k] + log_T[k, j]
                if v > best:
                    best = v
                    arg = k
            back[i, j] = arg
            nxt[j] = best + log_obs[i, j]
        for j in range(n):
            delta[j] = nxt[j]
    path = np.empty(n_frames, dtype=np.int64)
    best = -np.inf
    arg = 0
    for j in range(n):
        if delta[j] > best:
            best = delta[j]
            arg = j
    path[n_frames - 1] = arg
    for i in range(n_frames - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path, delta[arg]


@_jit
def _chain_viterbi_nb(log_start, log_stay, log_advance, log_obs):
    n_frames, n = log_obs.shape
    delta = np.full(n, -np.inf)
    nxt = np.empty(n)
    delta[0] = log_start + log_obs[0, 0]
    moved = np.zeros((n_frames, n), dtype=np.bool_)
    for i in range(1, n_frames):
        for k in range(n):
            stay = delta[k] + log_stay[k]
            adv = -np.inf
            if k > 0:
                adv = delta[k - 1] + log_advance[k - 1]
            if adv >= stay:
                moved[i, k] = True
                nxt[k] = adv + log_obs[i, k]
            else:
                nxt[k] = stay + log_obs[i, k]
        for k in range(n):
            delta[k] = nxt[k]
    path = np.empty(n_frames, dtype=np.int64)
    k = n - 1
    score = delta[k]
    for i in range(n_frames - 1, -1, -1):
        path[i] = k
        if i > 0 and moved[i, k]:
            k -= 1
    return path, score


@_jit
def _edit_distance_nb(ref, hyp):
    n = ref.shape[0]
    m = hyp.shape[0]
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(n + 1):
        d[i, 0] = i
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = d[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            if d[i - 1, j] + 1 < cost:
                cost = d[i - 1, j] + 1
            if d[i, j - 1] + 1 < cost:
                cost = d[i, j - 1] + 1
            d[i, j] = cost
    return d


def forward(log_init, log_T, log_obs):
    if USE_NUMBA:
        return _forward_nb(log_init, log_T, log_obs)
    return _kernels_numpy.forward(log_init, log_T, log_obs)


def viterbi(log_init, log_T, log_obs):
    if USE_NUMBA:
        path, score = _viterbi_nb(log_init, log_T, log_obs)
        return path, float(score)
    return _kernels_numpy.viterbi(log_init, log_T, log_obs)


def chain_viterbi(log_start, log_stay, log_advance, log_obs):
    if USE_NUMBA:
        path, score = _chain_viterbi_nb(float(log_start), log_stay, log_advance, log_obs)
        return path, float(score)
    return _kernels_numpy.chain_viterbi(log_start, log_stay, log_advance, log_obs)


def edit_distance_table(ref, hyp):
    ref = np.asarray(ref, dtype=np.int64)
    hyp = np.asarray(hyp, dtype=np.int64)
    if USE_NUMBA:
        return _edit_distance_nb(ref, hyp)
    return _kernels_numpy.edit_distance_table(ref, hyp)


NUMBA_KERNELS = {
    "forward": _forward_nb,
    "viterbi": _viterbi_nb,
    "chain_viterbi": _chain_viterbi_nb,
    "edit_distance_table": _edit_distance_nb,
}
