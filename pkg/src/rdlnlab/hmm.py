"""Ground-truth HMM, state-identifier maps and model persistence.

States are numbered by pdf-id ``p = phone * states_per_phone + sub_state``.
Every sub-state keeps ``self_loop_prob`` on itself and passes the remainder to
its successor; a phone-final sub-state instead spreads the remainder uniformly
over the entry states of all phones (its own phone included).

File format (``hmm v1``), UTF-8 text, floats written with 17 significant digits::

    hmm v1 <num_phones> <states_per_phone> <feature_dim>
    <T row 0: num_pdfs decimals>
    ...
    <T row num_pdfs-1>
    <initial_probs: num_pdfs decimals>
    <pdf 0: feature_dim means> | <feature_dim variances>
    ...
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import LoadError, ParameterError
from .rng import HMM_PARAMS, Stream

MIN_MEAN_SEPARATION = 1.0
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class HmmModel:
    num_phones: int
    states_per_phone: int
    feature_dim: int
    transitions: np.ndarray
    initial_probs: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        for arr in (self.transitions, self.initial_probs, self.means, self.variances):
            arr.flags.writeable = False

    @property
    def num_pdfs(self):
        return self.num_phones * self.states_per_phone

    @property
    def entry_states(self):
        return np.arange(self.num_phones) * self.states_per_phone

    @property
    def final_states(self):
        return self.entry_states + self.states_per_phone - 1

    @property
    def log_transitions(self):
        with np.errstate(divide="ignore"):
            return np.log(self.transitions)

    @property
    def log_initial(self):
        with np.errstate(divide="ignore"):
            return np.log(self.initial_probs)

    def phone_pdfs(self, phone):
        start = phone * self.states_per_phone
        return list(range(start, start + self.states_per_phone))

    def to_text(self):
        return dumps_hmm(self)

    def fingerprint(self):
        return hashlib.sha256(dumps_hmm(self).encode("utf-8")).hexdigest()[:16]

    def validate(self, tol=1e-9):
        n = self.num_pdfs
        T = self.transitions
        if T.shape != (n, n) or self.initial_probs.shape != (n,):
            raise ParameterError("transition/initial shapes do not match num_pdfs")
        if self.means.shape != (n, self.feature_dim) or self.variances.shape != self.means.shape:
            raise ParameterError("emission parameter shapes do not match")
        if np.any(T < 0) or np.any(T > 1):
            raise ParameterError("transition entries must lie in [0, 1]")
        if np.any(np.abs(T.sum(axis=1) - 1.0) > tol):
            raise ParameterError("transition rows must sum to 1")
        if np.any(self.initial_probs < 0) or abs(self.initial_probs.sum() - 1.0) > tol:
            raise ParameterError("initial_probs must be a probability vector")
        if not np.all(self.variances > 0):
            raise ParameterError("variances must be strictly positive")
        allowed = allowed_transitions(self.num_phones, self.states_per_phone)
        if np.any((T > 0) & ~allowed):
            raise ParameterError("transition matrix violates left-to-right topology")
        return self


def allowed_transitions(num_phones, states_per_phone):
    """Boolean mask of arcs permitted by the left-to-right topology."""
    n = num_phones * states_per_phone
    mask = np.eye(n, dtype=bool)
    entries = np.arange(num_phones) * states_per_phone
    for p in range(n):
        if p % states_per_phone == states_per_phone - 1:
            mask[p, entries] = True
        else:
            mask[p, p + 1] = True
    return mask


def _topology(num_phones, states_per_phone, self_loop_prob):
    n = num_phones * states_per_phone
    T = np.zeros((n, n))
    entries = np.arange(num_phones) * states_per_phone
    leave = 1.0 - self_loop_prob
    for p in range(n):
        T[p, p] += self_loop_prob
        if p % states_per_phone == states_per_phone - 1:
            T[p, entries] += leave / num_phones
        else:
            T[p, p + 1] += leave
    return T


def _draw_means(num_pdfs, feature_dim, stream, scale):
    """Sequential rejection sampling with pairwise separation >= 1.

    The proposal scale grows by 10% after every 100 consecutive rejections so
    that low-dimensional, many-state requests still terminate.
    """
    means = np.empty((num_pdfs, feature_dim))
    accepted = 0
    rejections = 0
    while accepted < num_pdfs:
        cand = scale * stream.normal(feature_dim)
        if accepted:
            dist = np.sqrt(((means[:accepted] - cand) ** 2).sum(axis=1))
            if dist.min() < MIN_MEAN_SEPARATION:
                rejections += 1
                if rejections % 100 == 0:
                    scale *= 1.1
                continue
        means[accepted] = cand
        accepted += 1
    return means


def build_hmm(num_phones, states_per_phone, feature_dim, self_loop_prob, seed,
              *, mean_scale=0.8, variance_range=(0.75, 1.25)):
    """Build the synthetic ground-truth model.

    Parameters
    ----------
    num_phones, states_per_phone, feature_dim : int
        Topology and feature sizes, all >= 1.
    self_loop_prob : float
        Self-transition probability of every sub-state, in (0, 1).
    seed : int
        Key of the random stream that draws the emission parameters.
    mean_scale : float
        Standard deviation of the proposal distribution for emission means.
        Smaller values make neighbouring pdfs overlap more.
    variance_range : (float, float)
        Diagonal variances are uniform in this interval.
    """
    for name, v in (("num_phones", num_phones), ("states_per_phone", states_per_phone),
                    ("feature_dim", feature_dim)):
        if int(v) != v or v < 1:
            raise ParameterError(f"{name} must be an integer >= 1, got {v!r}")
    if not 0.0 < self_loop_prob < 1.0:
        raise ParameterError(f"self_loop_prob must lie in (0, 1), got {self_loop_prob!r}")
    lo, hi = variance_range
    if not 0.0 < lo <= hi:
        raise ParameterError("variance_range must be positive and ordered")

    num_pdfs = num_phones * states_per_phone
    T = _topology(num_phones, states_per_phone, self_loop_prob)
    init = np.zeros(num_pdfs)
    init[np.arange(num_phones) * states_per_phone] = 1.0 / num_phones

    stream = Stream.for_domain(seed, HMM_PARAMS)
    means = _draw_means(num_pdfs, feature_dim, stream, mean_scale)
    variances = lo + (hi - lo) * stream.uniform(num_pdfs * feature_dim).reshape(num_pdfs, feature_dim)
    return HmmModel(num_phones, states_per_phone, feature_dim, T, init, means, variances).validate()


@dataclass(frozen=True, eq=False)
class StateMaps:
    """Bijections between pdf-ids, transition-ids and monophones.

    A transition-id names one arc ``(source pdf, destination pdf)`` with
    positive probability; ids are assigned in lexicographic arc order.
    """

    pdf_to_transition: tuple
    transition_to_pdf: np.ndarray
    transition_dest: np.ndarray
    transition_prob: np.ndarray
    pdf_to_monophone: np.ndarray
    num_monophones: int
    entry_mask: np.ndarray = field(repr=False)

    @property
    def num_pdfs(self):
        return len(self.pdf_to_transition)

    @property
    def num_transitions(self):
        return len(self.transition_to_pdf)

    def compression_matrix(self):
        """``num_pdfs x num_monophones`` 0/1 matrix summing pdf mass per phone."""
        M = np.zeros((self.num_pdfs, self.num_monophones))
        M[np.arange(self.num_pdfs), self.pdf_to_monophone] = 1.0
        return M

    def transition_matrix(self):
        """Rebuild the pdf-level transition matrix by walking transition-ids.

        pdf -> its transition-ids -> each arc's destination -> back to pdf-ids.
        """
        n = self.num_pdfs
        T = np.zeros((n, n))
        for p, tids in enumerate(self.pdf_to_transition):
            for t in tids:
                T[self.transition_to_pdf[t], self.transition_dest[t]] += self.transition_prob[t]
        return T


def build_state_maps(hmm):
    src, dst = np.nonzero(hmm.transitions)  # row-major = lexicographic
    pdf_to_transition = tuple(tuple(int(t) for t in np.flatnonzero(src == p))
                              for p in range(hmm.num_pdfs))
    entry_mask = np.zeros(hmm.num_pdfs, dtype=bool)
    entry_mask[hmm.entry_states] = True
    maps = StateMaps(
        pdf_to_transition=pdf_to_transition,
        transition_to_pdf=src.astype(np.int64),
        transition_dest=dst.astype(np.int64),
        transition_prob=hmm.transitions[src, dst].copy(),
        pdf_to_monophone=np.arange(hmm.num_pdfs, dtype=np.int64) // hmm.states_per_phone,
        num_monophones=hmm.num_phones,
        entry_mask=entry_mask,
    )
    for arr in (maps.transition_to_pdf, maps.transition_dest, maps.transition_prob,
                maps.pdf_to_monophone, maps.entry_mask):
        arr.flags.writeable = False
    return maps


def emission_loglik(hmm, frame):
    """Diagonal-Gaussian log-density of one frame (or a ``(n, dim)`` block) under every pdf."""
    x = np.asarray(frame, dtype=np.float64)
    if x.shape[-1:] != (hmm.feature_dim,) or x.ndim > 2:
        raise ParameterError(f"frame must have trailing dimension {hmm.feature_dim}, got shape {x.shape}")
    diff = x[..., None, :] - hmm.means
    return -0.5 * (np.log(hmm.variances).sum(axis=1) + hmm.feature_dim * _LOG_2PI
                   + (diff * diff / hmm.variances).sum(axis=-1))


def oracle_posteriors(hmm, frames):
    """Per-frame emission likelihoods normalised over pdfs."""
    ll = emission_loglik(hmm, np.atleast_2d(frames))
    ll -= ll.max(axis=1, keepdims=True)
    p = np.exp(ll)
    return p / p.sum(axis=1, keepdims=True)


def _fmt(values):
    return " ".join(format(float(v), ".17g") for v in values)


def dumps_hmm(hmm):
    lines = [f"hmm v1 {hmm.num_phones} {hmm.states_per_phone} {hmm.feature_dim}"]
    lines += [_fmt(row) for row in hmm.transitions]
    lines.append(_fmt(hmm.initial_probs))
    lines += [f"{_fmt(m)} | {_fmt(v)}" for m, v in zip(hmm.means, hmm.variances)]
    return "\n".join(lines) + "\n"


def _floats(tokens, count, lineno):
    if len(tokens) != count:
        raise LoadError(f"line {lineno}: expected {count} values, got {len(tokens)}")
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise LoadError(f"line {lineno}: {exc}") from None


def loads_hmm(text):
    lines = text.splitlines()
    if not lines:
        raise LoadError("line 1: empty model file")
    head = lines[0].split()
    if len(head) != 5 or head[:2] != ["hmm", "v1"]:
        raise LoadError("line 1: expected header 'hmm v1 <num_phones> <states_per_phone> <feature_dim>'")
    try:
        num_phones, spp, dim = (int(t) for t in head[2:])
    except ValueError:
        raise LoadError("line 1: header counts must be integers") from None
    if min(num_phones, spp, dim) < 1:
        raise LoadError("line 1: header counts must be >= 1")
    n = num_phones * spp
    expected = 1 + n + 1 + n
    if len(lines) != expected:
        raise LoadError(f"line {min(len(lines), expected) + 1}: expected {expected} lines, found {len(lines)}")
    T = np.array([_floats(lines[1 + i].split(), n, 2 + i) for i in range(n)])
    init = np.array(_floats(lines[1 + n].split(), n, 2 + n))
    means = np.empty((n, dim))
    variances = np.empty((n, dim))
    for i in range(n):
        lineno = 3 + n + i
        parts = lines[2 + n + i].split("|")
        if len(parts) != 2:
            raise LoadError(f"line {lineno}: expected 'means | variances'")
        means[i] = _floats(parts[0].split(), dim, lineno)
        variances[i] = _floats(parts[1].split(), dim, lineno)
    try:
        return HmmModel(num_phones, spp, dim, T, init, means, variances).validate()
    except ParameterError as exc:
        raise LoadError(f"line 2: invalid model: {exc}") from None


def save_hmm(hmm, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_hmm(hmm))


def load_hmm(path):
    with open(path, encoding="utf-8") as fh:
        return loads_hmm(fh.read())
