"""Synthetic labelled corpora drawn from the ground-truth HMM.

Each utterance ``i`` of a corpus with master seed ``s`` reads its own stream
``Stream.for_domain(s, UTTERANCE, i)`` in this order:

1. one word for the length ``L``, uniform in ``[min_frames, max_frames]``;
2. ``L`` uniforms choosing the state path (initial state, then one transition
   per frame);
3. ``L * feature_dim`` Box-Muller normals, row-major over ``(frame, dim)``.

Paths are drawn from the HMM conditioned on ending in a phone-final
sub-state, so every utterance is a sequence of complete phone traversals and
its transcript can be force-aligned.  The conditioning uses a backward pass
over ``T`` and does not change the per-step transition law away from the end
of the utterance.

File format (``corpus v1``), UTF-8 text::

    corpus v1 <n_utts> <seed> <hmm fingerprint>
    utt <id> <n_frames> <train|valid>
    <frame 0: feature_dim decimals, 17 significant digits>
    ...
    align <pdf-id per frame>
    trans <phone-ids>
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .decode import align_to_transcript, is_valid_alignment
from .errors import LoadError, ParameterError
from .hmm import build_state_maps
from .rng import UTTERANCE, Stream

TRAIN = "train"
VALID = "valid"


@dataclass(eq=False)
class Utterance:
    id: str
    frames: np.ndarray
    alignment: np.ndarray
    transcript: list

    @property
    def num_frames(self):
        return self.frames.shape[0]

    def __eq__(self, other):
        return (isinstance(other, Utterance) and self.id == other.id
                and self.transcript == other.transcript
                and np.array_equal(self.frames, other.frames)
                and np.array_equal(self.alignment, other.alignment))


@dataclass(eq=False)
class Corpus:
    utterances: list
    split: dict
    generator_seed: int
    hmm_fingerprint: str
    _by_id: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._by_id = {u.id: u for u in self.utterances}

    def subset(self, which):
        return [u for u in self.utterances if self.split[u.id] == which]

    @property
    def train(self):
        return self.subset(TRAIN)

    @property
    def valid(self):
        return self.subset(VALID)

    def __getitem__(self, utt_id):
        return self._by_id[utt_id]

    def __len__(self):
        return len(self.utterances)

    def __eq__(self, other):
        return (isinstance(other, Corpus) and self.generator_seed == other.generator_seed
                and self.hmm_fingerprint == other.hmm_fingerprint and self.split == other.split
                and self.utterances == other.utterances)


def sample_next_state(row, u):
    """Inverse-CDF draw from an (unnormalised) probability row with uniform ``u``."""
    cdf = np.cumsum(row)
    return int(np.searchsorted(cdf, u * cdf[-1], side="right"))


def _end_weights(hmm, n_frames):
    """Scaled probabilities of finishing in a phone-final state, per frame and state."""
    beta = np.zeros((n_frames, hmm.num_pdfs))
    beta[-1, hmm.final_states] = 1.0
    for t in range(n_frames - 2, -1, -1):
        b = hmm.transitions @ beta[t + 1]
        beta[t] = b / b.max()
    return beta


def sample_utterance(hmm, min_frames, max_frames, seed, index=0, utt_id=None):
    if not 1 <= min_frames <= max_frames:
        raise ParameterError(f"need 1 <= min_frames <= max_frames, got {min_frames}, {max_frames}")
    if min_frames < hmm.states_per_phone:
        raise ParameterError(f"min_frames must be >= states_per_phone ({hmm.states_per_phone})")
    stream = Stream.for_domain(seed, UTTERANCE, index)
    n = int(stream.integers(min_frames, max_frames, 1)[0])
    beta = _end_weights(hmm, n)
    u = stream.uniform(n)
    path = np.empty(n, dtype=np.int64)
    path[0] = sample_next_state(hmm.initial_probs * beta[0], u[0])
    for t in range(1, n):
        path[t] = sample_next_state(hmm.transitions[path[t - 1]] * beta[t], u[t])
    noise = stream.normal(n * hmm.feature_dim).reshape(n, hmm.feature_dim)
    frames = hmm.means[path] + noise * np.sqrt(hmm.variances[path])
    maps = build_state_maps(hmm)
    return Utterance(utt_id or f"utt{index:05d}", frames, path, align_to_transcript(path, maps))


def split_sizes(n_utts, split_ratio):
    """Train count ``round(ratio * n)`` (half away from zero), kept within ``[1, n - 1]``."""
    n_train = int(math.floor(split_ratio * n_utts + 0.5))
    n_train = min(max(n_train, 1), n_utts - 1)
    return n_train, n_utts - n_train


def generate_corpus(hmm, n_utts, split_ratio, seed, min_frames=20, max_frames=60):
    if int(n_utts) != n_utts or n_utts < 2:
        raise ParameterError("n_utts must be an integer >= 2")
    if not 0.0 < split_ratio < 1.0:
        raise ParameterError(f"split_ratio must lie in (0, 1), got {split_ratio!r}")
    n_train, _ = split_sizes(n_utts, split_ratio)
    utts = [sample_utterance(hmm, min_frames, max_frames, seed, index=i) for i in range(n_utts)]
    split = {u.id: (TRAIN if i < n_train else VALID) for i, u in enumerate(utts)}
    return Corpus(utts, split, int(seed), hmm.fingerprint())


def check_corpus(corpus, hmm):
    """Raise ParameterError unless every alignment is transition- and transcript-consistent."""
    maps = build_state_maps(hmm)
    for i, u in enumerate(corpus.utterances):
        if u.frames.ndim != 2 or u.frames.shape[1] != hmm.feature_dim or u.num_frames == 0:
            raise ParameterError(f"utterance {i} ({u.id}): bad frame block shape {u.frames.shape}")
        if len(u.alignment) != u.num_frames or not is_valid_alignment(u.alignment, hmm):
            raise ParameterError(f"utterance {i} ({u.id}): alignment is not transition-consistent")
        if align_to_transcript(u.alignment, maps) != list(u.transcript):
            raise ParameterError(f"utterance {i} ({u.id}): transcript disagrees with alignment")


def _fmt(values):
    return " ".join(format(float(v), ".17g") for v in values)


def dumps_corpus(corpus):
    lines = [f"corpus v1 {len(corpus.utterances)} {corpus.generator_seed} {corpus.hmm_fingerprint}"]
    for u in corpus.utterances:
        lines.append(f"utt {u.id} {u.num_frames} {corpus.split[u.id]}")
        lines.extend(_fmt(row) for row in u.frames)
        lines.append("align " + " ".join(str(int(p)) for p in u.alignment))
        lines.append("trans " + " ".join(str(int(p)) for p in u.transcript))
    return "\n".join(lines) + "\n"


def save_corpus(corpus, path, hmm=None):
    if hmm is not None:
        if hmm.fingerprint() != corpus.hmm_fingerprint:
            raise ParameterError("corpus fingerprint does not match the supplied HMM")
        check_corpus(corpus, hmm)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_corpus(corpus))


def loads_corpus(text, hmm=None):
    lines = text.splitlines()
    if not lines:
        raise LoadError("record 0: empty corpus file")
    head = lines[0].split()
    if len(head) != 5 or head[:2] != ["corpus", "v1"]:
        raise LoadError("record 0: expected header 'corpus v1 <n> <seed> <fingerprint>'")
    try:
        n, seed = int(head[2]), int(head[3])
    except ValueError:
        raise LoadError("record 0: header counts must be integers") from None
    fingerprint = head[4]
    if n < 1:
        raise LoadError("record 0: corpus declares no utterances")
    if hmm is not None and hmm.fingerprint() != fingerprint:
        raise LoadError(f"record 0: corpus fingerprint {fingerprint} does not match HMM {hmm.fingerprint()}")

    utts, split = [], {}
    pos = 1
    for rec in range(1, n + 1):
        try:
            tag, uid, n_frames, which = lines[pos].split()
            n_frames = int(n_frames)
            if tag != "utt" or which not in (TRAIN, VALID) or n_frames < 1:
                raise ValueError("bad utterance header")
            rows = [[float(t) for t in lines[pos + 1 + f].split()] for f in range(n_frames)]
            frames = np.array(rows, dtype=np.float64)
            if frames.ndim != 2 or (hmm is not None and frames.shape[1] != hmm.feature_dim):
                raise ValueError("ragged or mis-sized frame rows")
            align = lines[pos + 1 + n_frames].split()
            trans = lines[pos + 2 + n_frames].split()
            if align[0] != "align" or trans[0] != "trans" or len(align) - 1 != n_frames:
                raise ValueError("missing or mis-sized align/trans lines")
            alignment = np.array([int(t) for t in align[1:]], dtype=np.int64)
            transcript = [int(t) for t in trans[1:]]
        except (IndexError, ValueError) as exc:
            raise LoadError(f"record {rec} (line {pos + 1}): {exc}") from None
        if uid in split:
            raise LoadError(f"record {rec}: duplicate utterance id {uid}")
        utts.append(Utterance(uid, frames, alignment, transcript))
        split[uid] = which
        pos += n_frames + 3
    if pos != len(lines):
        raise LoadError(f"record {n + 1} (line {pos + 1}): trailing data after {n} utterances")
    corpus = Corpus(utts, split, seed, fingerprint)
    if hmm is not None:
        try:
            check_corpus(corpus, hmm)
        except ParameterError as exc:
            raise LoadError(str(exc)) from None
    return corpus


def load_corpus(path, hmm=None):
    with open(path, encoding="utf-8") as fh:
        return loads_corpus(fh.read(), hmm)
