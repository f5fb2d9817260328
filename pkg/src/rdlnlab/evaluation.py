"""Frame cross-entropy, WER and decoding evaluation; metrics file I/O.

Metrics file: a header line ``arm epoch train_ce valid_ce valid_wer`` then
one row per (arm, epoch) with reals printed to 9 significant digits.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .decode import align_to_transcript, viterbi_decode
from .errors import DecodeError, LoadError, ParameterError

PROB_FLOOR = 1e-30
METRICS_HEADER = "arm epoch train_ce valid_ce valid_wer"


def frame_cross_entropy(posteriors, alignment):
    """Mean of ``-log max(posterior[i, label_i], 1e-30)`` over frames, in nats."""
    post = np.atleast_2d(np.asarray(posteriors, dtype=np.float64))
    alignment = np.asarray(alignment, dtype=np.int64)
    if post.shape[0] != alignment.shape[0]:
        raise ParameterError(f"{post.shape[0]} posteriors vs {alignment.shape[0]} labels")
    picked = post[np.arange(len(alignment)), alignment]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


@dataclass
class WerResult:
    wer: float
    distance: int
    substitutions: int
    deletions: int
    insertions: int
    ref_length: int


def word_error_rate(ref, hyp):
    """Levenshtein distance over tokens divided by the reference length.

    The S/D/I split comes from a backtrace that prefers the diagonal
    (match or substitution), then deletion, then insertion.
    """
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        raise ParameterError("reference must be non-empty")
    vocab = {}
    codes = [[vocab.setdefault(t, len(vocab)) for t in seq] for seq in (ref, hyp)]
    d = _kernels.edit_distance_table(*codes)
    i, j = len(ref), len(hyp)
    subs = dels = ins = 0
    while i or j:
        if i and j and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    dist = int(d[-1, -1])
    return WerResult(dist / len(ref), dist, int(subs), dels, ins, len(ref))


@dataclass
class DecodingReport:
    valid_ce: float
    valid_wer: float
    errors: int
    ref_length: int
    excluded: list


def evaluate_decoding(net, utterances, hmm, maps, cfg=None, oracle=False):
    """Cross-entropy and aggregate WER over ``utterances``.

    Posteriors come from the network (with language-level inputs when ``cfg``
    stacks them) or, with ``oracle=True``, from the true emission densities.
    Aggregate WER is total edit errors over total reference length.
    Utterances whose decode fails are listed in ``excluded`` and left out.
    """
    from .hmm import oracle_posteriors
    from .rdln import infer_posteriors

    if not utterances:
        raise ParameterError("nothing to evaluate")
    ce_sum = 0.0
    frames = 0
    errors = 0
    ref_len = 0
    excluded = []
    for utt in utterances:
        post = oracle_posteriors(hmm, utt.frames) if oracle else infer_posteriors(net, utt, cfg, hmm, maps)
        ce_sum += frame_cross_entropy(post, utt.alignment) * utt.num_frames
        frames += utt.num_frames
        try:
            path, _ = viterbi_decode(post, hmm)
        except DecodeError:
            excluded.append(utt.id)
            continue
        res = word_error_rate(utt.transcript, align_to_transcript(path, maps))
        errors += res.distance
        ref_len += res.ref_length
    wer = errors / ref_len if ref_len else float("nan")
    return DecodingReport(ce_sum / frames, wer, errors, ref_len, excluded)


@dataclass
class EpochMetrics:
    arm: str
    epoch: int
    train_ce: float
    valid_ce: float
    valid_wer: float

    def to_line(self):
        return (f"{self.arm} {self.epoch} {self.train_ce:.9g} "
                f"{self.valid_ce:.9g} {self.valid_wer:.9g}")


def dumps_metrics(rows):
    return "\n".join([METRICS_HEADER] + [r.to_line() for r in rows]) + "\n"


def save_metrics(rows, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_metrics(rows))


def loads_metrics(text):
    lines = text.splitlines()
    if not lines or lines[0].split() != METRICS_HEADER.split():
        raise LoadError(f"line 1: expected header '{METRICS_HEADER}'")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 5:
            raise LoadError(f"line {n}: expected 5 fields, got {len(parts)}")
        try:
            rows.append(EpochMetrics(parts[0], int(parts[1]), float(parts[2]),
                                     float(parts[3]), float(parts[4])))
        except ValueError as exc:
            raise LoadError(f"line {n}: {exc}") from None
    return rows


def load_metrics(path):
    with open(path, encoding="utf-8") as fh:
        return loads_metrics(fh.read())
