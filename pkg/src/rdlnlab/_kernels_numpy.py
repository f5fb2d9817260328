"""Pure-numpy trellis and edit-distance kernels.

These are the reference path; ``_kernels`` swaps in numba-compiled loops with
identical signatures unless ``RDLNLAB_DISABLE_NUMBA`` is set.
"""

import numpy as np


def _logsumexp_cols(a):
    m = a.max(axis=0)
    finite = np.isfinite(m)
    safe = np.where(finite, m, 0.0)
    with np.errstate(divide="ignore"):
        out = safe + np.log(np.exp(a - safe).sum(axis=0))
    return np.where(finite, out, -np.inf)


def forward(log_init, log_T, log_obs):
    """Scaled forward recursion in the log domain.

    Returns ``(log_cols, log_scales)`` where ``log_cols[i]`` is the normalised
    log posterior column at frame ``i`` and ``log_scales.sum()`` is the total
    log-likelihood.  A frame with no surviving path gets scale ``-inf`` and
    the recursion stops there.
    """
    n_frames, n = log_obs.shape
    cols = np.full((n_frames, n), -np.inf)
    scales = np.full(n_frames, -np.inf)
    a = log_init + log_obs[0]
    for i in range(n_frames):
        if i:
            a = _logsumexp_cols(cols[i - 1][:, None] + log_T) + log_obs[i]
        m = a.max()
        if not np.isfinite(m):
            break
        c = m + np.log(np.exp(a - m).sum())
        scales[i] = c
        cols[i] = a - c
    return cols, scales


def viterbi(log_init, log_T, log_obs):
    """Best path by max-product; ties go to the lowest state index.

    Returns ``(path, score)``; ``score`` is ``-inf`` when no path survives.
    """
    n_frames, n = log_obs.shape
    back = np.zeros((n_frames, n), dtype=np.int64)
    delta = log_init + log_obs[0]
    for i in range(1, n_frames):
        cand = delta[:, None] + log_T
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(n)] + log_obs[i]
    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    score = float(delta[path[-1]])
    for i in range(n_frames - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path, score


def chain_viterbi(log_start, log_stay, log_advance, log_obs):
    """Viterbi over a linear chain that must start in state 0 and end in the last state.

    ``log_stay[k]`` is the self-loop of chain state ``k``, ``log_advance[k]``
    the arc ``k -> k+1``; ``log_obs`` is ``(n_frames, n_chain)``.  Ties prefer
    advancing (the lower-indexed predecessor).
    """
    n_frames, n = log_obs.shape
    delta = np.full(n, -np.inf)
    delta[0] = log_start + log_obs[0, 0]
    moved = np.zeros((n_frames, n), dtype=bool)
    for i in range(1, n_frames):
        stay = delta + log_stay
        adv = np.full(n, -np.inf)
        adv[1:] = delta[:-1] + log_advance[:-1]
        moved[i] = adv >= stay
        delta = np.where(moved[i], adv, stay) + log_obs[i]
    path = np.empty(n_frames, dtype=np.int64)
    k = n - 1
    score = float(delta[k])
    for i in range(n_frames - 1, -1, -1):
        path[i] = k
        if i and moved[i, k]:
            k -= 1
    return path, score


def edit_distance_table(ref, hyp):
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        sub = d[i - 1, :-1] + (ref[i - 1] != hyp)
        row = np.minimum(sub, d[i - 1, 1:] + 1)
        # insertions chain left-to-right along the row
        d[i, 1:] = row
        for j in range(1, m + 1):
            if d[i, j - 1] + 1 < d[i, j]:
                d[i, j] = d[i, j - 1] + 1
    return d
