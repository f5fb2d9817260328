"""Trellis recursion, state prediction, Viterbi decoding and forced alignment.

Posteriors are plain 1-D float arrays over pdf-ids; sequences of them are
``(n_frames, num_pdfs)`` arrays.  All accumulation happens in the log domain
with zero probabilities carried as ``-inf``.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import AlignmentError, DecodeError, ParameterError

SUM = "sum"
MAX = "max"
_MODES = (SUM, MAX)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=np.float64))


def _logsumexp(a, axis=0):
    m = a.max(axis=axis)
    finite = np.isfinite(m)
    safe = np.where(finite, m, 0.0)
    with np.errstate(divide="ignore"):
        out = safe + np.log(np.exp(a - np.expand_dims(safe, axis)).sum(axis=axis))
    return np.where(finite, out, -np.inf)


def check_posterior(p, n=None, tol=1e-9):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or (n is not None and p.shape[0] != n):
        raise ParameterError(f"posterior must be a vector of length {n}, got shape {p.shape}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise ParameterError("posterior must be non-negative and sum to 1")
    return p


def uniform(n):
    return np.full(n, 1.0 / n)


def _check_mode(mode):
    if mode not in _MODES:
        raise ParameterError(f"mode must be 'sum' or 'max', got {mode!r}")


def _step_log(log_prev, log_obs, log_T, mode, frame):
    cand = log_prev[:, None] + log_T
    if mode == SUM:
        acc = _logsumexp(cand, axis=0)
        arg = None
    else:
        arg = np.argmax(cand, axis=0)
        acc = cand[arg, np.arange(cand.shape[1])]
    a = acc + log_obs
    z = _logsumexp(a)
    if not np.isfinite(z):
        raise DecodeError(f"no path with positive probability reaches frame {frame}", frame=frame)
    return a - z, z, arg


def trellis_step(prev, obs, T, mode=SUM, frame=None):
    """One column of the recursion ``out_j ~ (sum_k or max_k prev_k T_kj) * obs_j``.

    Returns the renormalised column; in max mode returns ``(column, argmax)``
    where ``argmax[j]`` is the best predecessor of state ``j`` (lowest index
    on ties).
    """
    _check_mode(mode)
    prev = np.asarray(prev, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    n = T.shape[0]
    if T.shape != (n, n) or prev.shape != (n,) or obs.shape != (n,):
        raise ParameterError("prev, obs and T dimensions disagree")
    col, _, arg = _step_log(_log(prev), _log(obs), _log(T), mode, frame)
    if mode == MAX:
        return np.exp(col), arg
    return np.exp(col)


@dataclass
class Trellis:
    """Normalised trellis columns with their log scale factors.

    In sum mode ``log_total`` is the sequence log-likelihood; in max mode it
    is the best path's log score.
    """

    columns: np.ndarray
    log_scales: np.ndarray
    mode: str
    backpointers: np.ndarray = None

    @property
    def log_total(self):
        total = float(self.log_scales.sum())
        if self.mode == MAX:
            total += float(np.log(self.columns[-1].max()))
        return total


def run_trellis(obs_seq, T, initial=None, mode=SUM):
    """Run the recursion over a whole observation sequence.

    With ``initial`` the first column is ``initial * obs[0]`` renormalised.
    Without it the first column is ``obs[0]`` itself (the context rule
    ``P_0 = O_0``), copied bit-for-bit.
    """
    _check_mode(mode)
    obs_seq = np.atleast_2d(np.asarray(obs_seq, dtype=np.float64))
    n_frames, n = obs_seq.shape
    if n_frames == 0:
        raise ParameterError("observation sequence is empty")
    log_T = _log(T)
    log_obs = _log(obs_seq)
    cols = np.empty((n_frames, n))
    scales = np.zeros(n_frames)
    back = np.zeros((n_frames, n), dtype=np.int64) if mode == MAX else None
    if initial is None:
        cols[0] = obs_seq[0]
        log_col = log_obs[0]
    else:
        a = _log(initial) + log_obs[0]
        z = _logsumexp(a)
        if not np.isfinite(z):
            raise DecodeError("no path with positive probability reaches frame 0", frame=0)
        log_col = a - z
        scales[0] = z
        cols[0] = np.exp(log_col)
    for i in range(1, n_frames):
        log_col, scales[i], arg = _step_log(log_col, log_obs[i], log_T, mode, i)
        cols[i] = np.exp(log_col)
        if back is not None:
            back[i] = arg
    return Trellis(cols, scales, mode, back)


def predict_context_independent(prev, T):
    """Next-frame state prediction ``(prev @ T) / z`` with ``z`` its sum."""
    u = np.asarray(prev, dtype=np.float64) @ np.asarray(T, dtype=np.float64)
    return u / u.sum()


def predict_context_dependent(history, T, mode=SUM):
    """Decode the observed history, then take one step with flat emissions.

    An empty history yields the uniform posterior.  A single-frame history
    starts the trellis at ``P_0 = O_0`` and so reduces exactly to
    :func:`predict_context_independent`.
    """
    _check_mode(mode)
    T = np.asarray(T, dtype=np.float64)
    history = np.asarray(history, dtype=np.float64).reshape(-1, T.shape[0])
    if len(history) == 0:
        return uniform(T.shape[0])
    if len(history) == 1:
        last = history[0]
    else:
        last = run_trellis(history, T, mode=mode).columns[-1]
    if mode == SUM:
        return predict_context_independent(last, T)
    acc = (last[:, None] * T).max(axis=0)
    return acc / acc.sum()


def _first_dead_frame(log_init, log_T, log_obs):
    log_col = log_init + log_obs[0]
    if not np.isfinite(log_col.max()):
        return 0
    for i in range(1, len(log_obs)):
        log_col = (log_col[:, None] + log_T).max(axis=0) + log_obs[i]
        if not np.isfinite(log_col.max()):
            return i
    return None


def forward_loglik(obs_seq, hmm):
    """Sequence log-likelihood and normalised forward columns (sum mode)."""
    log_obs = _log(np.atleast_2d(obs_seq))
    cols, scales = _kernels.forward(hmm.log_initial, hmm.log_transitions, log_obs)
    if not np.all(np.isfinite(scales)):
        frame = int(np.argmin(np.isfinite(scales)))
        raise DecodeError(f"no path with positive probability reaches frame {frame}", frame=frame)
    return float(scales.sum()), np.exp(cols)


def viterbi_decode(obs_seq, hmm):
    """Best pdf path under ``hmm`` and its log score.

    The score is the log of ``initial * prod(T) * prod(obs)`` along the path.
    """
    obs_seq = np.atleast_2d(np.asarray(obs_seq, dtype=np.float64))
    if obs_seq.shape[0] == 0:
        raise ParameterError("observation sequence is empty")
    if obs_seq.shape[1] != hmm.num_pdfs:
        raise ParameterError(f"observations must have {hmm.num_pdfs} columns")
    log_init, log_T, log_obs = hmm.log_initial, hmm.log_transitions, _log(obs_seq)
    path, score = _kernels.viterbi(log_init, log_T, log_obs)
    if not np.isfinite(score):
        frame = _first_dead_frame(log_init, log_T, log_obs)
        raise DecodeError(f"no path with positive probability reaches frame {frame}", frame=frame)
    return path, score


def transcript_states(hmm, transcript):
    pdfs = []
    for ph in transcript:
        if not 0 <= ph < hmm.num_phones:
            raise ParameterError(f"phone id {ph} out of range")
        pdfs.extend(hmm.phone_pdfs(int(ph)))
    return np.asarray(pdfs, dtype=np.int64)


def forced_align(obs_seq, hmm, transcript):
    """Best path that traverses every sub-state of every transcript phone in order."""
    obs_seq = np.atleast_2d(np.asarray(obs_seq, dtype=np.float64))
    if len(transcript) == 0:
        raise AlignmentError("empty transcript")
    chain = transcript_states(hmm, transcript)
    n_frames = obs_seq.shape[0]
    if n_frames < len(chain):
        raise AlignmentError(f"{n_frames} frames cannot cover {len(chain)} transcript sub-states")
    log_T = hmm.log_transitions
    log_stay = log_T[chain, chain]
    log_advance = np.full(len(chain), -np.inf)
    log_advance[:-1] = log_T[chain[:-1], chain[1:]]
    log_obs = np.ascontiguousarray(_log(obs_seq)[:, chain])
    path, score = _kernels.chain_viterbi(float(hmm.log_initial[chain[0]]), log_stay, log_advance, log_obs)
    if not np.isfinite(score):
        raise AlignmentError("transcript has no positive-probability alignment")
    return chain[path]


def align_to_transcript(alignment, maps):
    """Phone sequence visited by an alignment.

    A new phone starts whenever the pdf changes to an entry sub-state; staying
    inside one phone's sub-state run contributes a single token.
    """
    alignment = np.asarray(alignment, dtype=np.int64)
    if alignment.size == 0:
        return []
    starts = np.ones(len(alignment), dtype=bool)
    starts[1:] = (alignment[1:] != alignment[:-1]) & maps.entry_mask[alignment[1:]]
    return maps.pdf_to_monophone[alignment[starts]].tolist()


def is_valid_alignment(alignment, hmm):
    alignment = np.asarray(alignment, dtype=np.int64)
    if alignment.size == 0 or alignment.min() < 0 or alignment.max() >= hmm.num_pdfs:
        return False
    return bool(np.all(hmm.transitions[alignment[:-1], alignment[1:]] > 0))
