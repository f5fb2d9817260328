"""Language-level information for acoustic-model training.

A variant picks where the context comes from (frame labels or the network's
own posteriors), how it is turned into a next-state prediction (a one-step
transform by ``T`` or a decoder pass over the whole history with flat
emissions for the current frame), and how the prediction reaches the network
(an auxiliary objective or extra input dimensions).  That gives eight
variants; :func:`all_variants` lists them.

Augmented input layout: ``[base features | language block]``; the block has
``num_monophones`` entries when compressed, else ``num_pdfs``.

Augmented-feature dump format, one frame per line::

    <utt_id> <frame_idx> | <base...> | <lang...>
"""

import itertools
from dataclasses import dataclass, replace

import numpy as np

from . import acoustic
from .decode import (MAX, SUM, predict_context_dependent, predict_context_independent,
                     run_trellis, uniform)
from .errors import ConfigError, ParameterError
from .evaluation import frame_cross_entropy
from .rng import SHUFFLE, Stream

LABELS = "labels"
OUTPUTS = "outputs"
CONTEXT_DEPENDENT = "context_dependent"
CONTEXT_INDEPENDENT = "context_independent"
OBJECTIVE = "objective"
INPUT_STACK = "input_stack"

MASS_TOL = 1e-12


@dataclass(frozen=True)
class VariantConfig:
    context_source: str = OUTPUTS
    processing: str = CONTEXT_INDEPENDENT
    incorporation: str = INPUT_STACK
    context_depth: int = 1
    compress_to_monophone: bool = True
    aux_weight: float = 0.3
    decode_mode: str = SUM

    def __post_init__(self):
        if self.context_source not in (LABELS, OUTPUTS):
            raise ConfigError(f"context_source must be labels or outputs, got {self.context_source!r}")
        if self.processing not in (CONTEXT_DEPENDENT, CONTEXT_INDEPENDENT):
            raise ConfigError(f"unknown processing {self.processing!r}")
        if self.incorporation not in (OBJECTIVE, INPUT_STACK):
            raise ConfigError(f"unknown incorporation {self.incorporation!r}")
        if int(self.context_depth) != self.context_depth or self.context_depth < 1:
            raise ConfigError("context_depth must be an integer >= 1")
        if not self.aux_weight >= 0:
            raise ConfigError("aux_weight must be non-negative")
        if self.decode_mode not in (SUM, MAX):
            raise ConfigError("decode_mode must be sum or max")

    @property
    def triple(self):
        return self.context_source, self.processing, self.incorporation

    def language_dim(self, maps):
        return maps.num_monophones if self.compress_to_monophone else maps.num_pdfs

    def input_dim(self, feature_dim, maps):
        if self.incorporation == INPUT_STACK:
            return feature_dim + self.language_dim(maps)
        return feature_dim


def all_variants(**overrides):
    """The 2 x 2 x 2 variant space in (source, processing, incorporation) order."""
    return [VariantConfig(s, p, i, **overrides) for s, p, i in itertools.product(
        (LABELS, OUTPUTS), (CONTEXT_DEPENDENT, CONTEXT_INDEPENDENT), (OBJECTIVE, INPUT_STACK))]


def one_hot(labels, n):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n))
    out[np.arange(labels.size), labels] = 1.0
    return out


def context_posterior(source, frame_index, labels=None, outputs=None, depth=1, num_pdfs=None):
    """History for frame ``frame_index``: up to ``depth`` preceding posteriors, oldest first.

    Labels become one-hot rows; outputs are taken as stored.  Frame 0 gets an
    empty ``(0, num_pdfs)`` history.
    """
    if source == LABELS:
        if labels is None or num_pdfs is None:
            raise ParameterError("labels source needs labels and num_pdfs")
        length = len(labels)
    elif source == OUTPUTS:
        if outputs is None:
            raise ParameterError("outputs source needs stored outputs")
        outputs = np.atleast_2d(outputs)
        num_pdfs = outputs.shape[1]
        length = outputs.shape[0]
    else:
        raise ParameterError(f"unknown context source {source!r}")
    if not 0 <= frame_index <= length:
        raise ParameterError(f"frame_index {frame_index} outside [0, {length}]")
    lo = max(0, frame_index - depth)
    if source == LABELS:
        return one_hot(labels[lo:frame_index], num_pdfs)
    return outputs[lo:frame_index].copy()


def language_prediction(cfg, history, T):
    """Next-state prediction over pdfs from a history (uniform when empty)."""
    T = np.asarray(T, dtype=np.float64)
    history = np.asarray(history, dtype=np.float64).reshape(-1, T.shape[0])
    if len(history) == 0:
        return uniform(T.shape[0])
    if cfg.processing == CONTEXT_INDEPENDENT:
        return predict_context_independent(history[-1], T)
    return predict_context_dependent(history, T, cfg.decode_mode)


def compress(pred, maps):
    """Sum pdf mass into monophone bins."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != (maps.num_pdfs,):
        raise ParameterError(f"prediction must have {maps.num_pdfs} entries")
    out = np.bincount(maps.pdf_to_monophone, weights=pred, minlength=maps.num_monophones)
    if abs(out.sum() - pred.sum()) > MASS_TOL:
        raise AssertionError("compression lost probability mass")
    return out


def language_block(cfg, history, T, maps):
    pred = language_prediction(cfg, history, T)
    return compress(pred, maps) if cfg.compress_to_monophone else pred


def augment_input(base, lang, input_dim=None):
    base = np.asarray(base, dtype=np.float64)
    lang = np.asarray(lang, dtype=np.float64)
    out = np.concatenate([base, lang], axis=-1)
    if input_dim is not None and out.shape[-1] != input_dim:
        raise ParameterError(f"augmented input has {out.shape[-1]} dims, network expects {input_dim}")
    return out


def split_augmented(vec, base_dim):
    vec = np.asarray(vec)
    return vec[..., :base_dim], vec[..., base_dim:]


# -- per-utterance language blocks -------------------------------------------

def label_blocks(cfg, labels, T, maps, hook=None):
    """Language blocks for every frame from the reference labels (net-independent)."""
    n = maps.num_pdfs
    blocks = np.empty((len(labels), cfg.language_dim(maps)))
    for i in range(len(labels)):
        hist = context_posterior(LABELS, i, labels=labels, depth=cfg.context_depth, num_pdfs=n)
        if hook is not None:
            hook(hist)
        blocks[i] = language_block(cfg, hist, T, maps)
    return blocks


def recursive_outputs(net, frames, cfg, T, maps, hook=None):
    """Run the stacked network frame by frame, feeding its own posteriors back.

    Returns ``(posteriors, blocks)``; ``blocks[i]`` is the language block that
    was appended to frame ``i``.
    """
    n_frames = frames.shape[0]
    post = np.empty((n_frames, maps.num_pdfs))
    blocks = np.empty((n_frames, cfg.language_dim(maps)))
    for i in range(n_frames):
        hist = context_posterior(OUTPUTS, i, outputs=post[:i] if i else np.empty((0, maps.num_pdfs)),
                                 depth=cfg.context_depth)
        if hook is not None:
            hook(hist)
        blocks[i] = language_block(cfg, hist, T, maps)
        post[i] = acoustic.forward(net, augment_input(frames[i], blocks[i]))
    return post, blocks


def check_net(net, cfg, feature_dim, maps):
    want = feature_dim if cfg is None else cfg.input_dim(feature_dim, maps)
    if net.input_dim != want:
        raise ConfigError(f"network input dim {net.input_dim} does not match the variant ({want})")
    if net.output_dim != maps.num_pdfs:
        raise ConfigError(f"network output dim {net.output_dim} != num_pdfs {maps.num_pdfs}")


def infer_posteriors(net, utt, cfg, hmm, maps):
    """Test-time posteriors; stacked variants always use the network's own outputs as context."""
    if cfg is None or cfg.incorporation == OBJECTIVE:
        return acoustic.forward(net, utt.frames)
    test_cfg = replace(cfg, context_source=OUTPUTS)
    return recursive_outputs(net, utt.frames, test_cfg, hmm.transitions, maps)[0]


def augmented_inputs(net, utts, cfg, hmm, maps, hook=None, label_cache=None):
    """Training-time stacked inputs, one ``(n_frames, input_dim)`` array per utterance."""
    out = []
    for utt in utts:
        if cfg.context_source == LABELS:
            if label_cache is not None and utt.id in label_cache:
                blocks = label_cache[utt.id]
            else:
                blocks = label_blocks(cfg, utt.alignment, hmm.transitions, maps, hook)
                if label_cache is not None:
                    label_cache[utt.id] = blocks
        else:
            blocks = recursive_outputs(net, utt.frames, cfg, hmm.transitions, maps, hook)[1]
        out.append(augment_input(utt.frames, blocks))
    return out


def dumps_augmented(utts, inputs, base_dim):
    lines = []
    for utt, X in zip(utts, inputs):
        for i, row in enumerate(X):
            base, lang = split_augmented(row, base_dim)
            lines.append(f"{utt.id} {i} | {' '.join(format(v, '.17g') for v in base)}"
                         f" | {' '.join(format(v, '.17g') for v in lang)}")
    return "\n".join(lines) + "\n"


# -- auxiliary objective -----------------------------------------------------

def _carry(cfg, older, T):
    """Constant multiplier applied to the most recent output in the estimate branch."""
    if cfg.processing == CONTEXT_INDEPENDENT or len(older) == 0:
        return np.ones(T.shape[0])
    last = older[0] if len(older) == 1 else run_trellis(older, T, mode=cfg.decode_mode).columns[-1]
    if cfg.decode_mode == SUM:
        return last @ T
    return (last[:, None] * T).max(axis=0)


def aux_arrays(net, utt, cfg, hmm, maps, hook=None):
    """Per-frame auxiliary-objective inputs for one utterance.

    The estimate branch differentiates through the network output of frame
    ``i - 1`` only; older history enters through a constant ``carry`` taken
    from the labels or from the current network's posteriors, per the
    variant's context source.  The target is always label-derived.
    """
    n = maps.num_pdfs
    T = hmm.transitions
    X = utt.frames
    labels = utt.alignment
    n_frames = X.shape[0]
    outputs = acoustic.forward(net, X) if cfg.context_source == OUTPUTS and cfg.context_depth > 1 else None
    prev = np.empty_like(X)
    prev[0] = X[0]
    prev[1:] = X[:-1]
    carry = np.ones((n_frames, n))
    target = np.empty((n_frames, cfg.language_dim(maps)))
    mask = np.ones(n_frames, dtype=bool)
    mask[0] = False
    for i in range(n_frames):
        hist = context_posterior(LABELS, i, labels=labels, depth=cfg.context_depth, num_pdfs=n)
        if hook is not None:
            hook(hist)
        target[i] = language_block(cfg, hist, T, maps)
        if i >= 2 and cfg.processing == CONTEXT_DEPENDENT:
            lo = max(0, i - cfg.context_depth)
            older = one_hot(labels[lo:i - 1], n) if outputs is None else outputs[lo:i - 1]
            carry[i] = _carry(cfg, older, T)
    return prev, carry, target, mask


# -- training ----------------------------------------------------------------

@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 0.05
    batch_size: int = 16
    seed: int = 0


@dataclass
class EpochReport:
    epoch: int
    train: acoustic.LossReport
    valid_ce: float


def _stack_train(utts):
    X = np.concatenate([u.frames for u in utts])
    y = np.concatenate([u.alignment for u in utts])
    return X, y


def training_pass(net, corpus, hmm, maps, params, n_epochs, cfg=None, hook=None):
    """Train ``net`` in place for ``n_epochs`` epochs.

    ``cfg=None`` is the plain cross-entropy baseline.  Frame order in epoch
    ``e`` is the permutation drawn from stream ``(seed, SHUFFLE, e)``, so a
    warm-started run sees exactly the batches the baseline would have seen.
    Returns one :class:`EpochReport` per epoch (train and validation CE).
    """
    check_net(net, cfg, hmm.feature_dim, maps)
    train, valid = corpus.train, corpus.valid
    X, y = _stack_train(train)
    label_cache = {}
    comp = maps.compression_matrix() if cfg is not None and cfg.compress_to_monophone else None
    reports = []
    for _ in range(n_epochs):
        epoch = net.epoch + 1
        aux_all = None
        inputs = X
        if cfg is not None and cfg.incorporation == INPUT_STACK:
            inputs = np.concatenate(augmented_inputs(net, train, cfg, hmm, maps, hook, label_cache))
        elif cfg is not None:
            parts = [aux_arrays(net, u, cfg, hmm, maps, hook) for u in train]
            aux_all = [np.concatenate(a) for a in zip(*parts)]

        perm = Stream.for_domain(params.seed, SHUFFLE, epoch).permutation(len(y))
        sums = np.zeros(3)
        for start in range(0, len(perm), params.batch_size):
            idx = perm[start:start + params.batch_size]
            aux = None
            if aux_all is not None:
                prev, carry, target, mask = aux_all
                aux = acoustic.AuxBatch(prev[idx], carry[idx], target[idx], hmm.transitions,
                                        comp, cfg.decode_mode, mask[idx])
            rep, grads = acoustic.loss_and_gradients(net, inputs[idx], y[idx], aux,
                                                     cfg.aux_weight if aux is not None else 0.0)
            acoustic.sgd_step(net, grads, params.learning_rate)
            sums += np.array([rep.primary_ce, rep.auxiliary_ce, rep.total]) * len(idx)
        net.epoch = epoch
        means = sums / len(y)
        valid_ce = validation_ce(net, valid, cfg, hmm, maps)
        reports.append(EpochReport(epoch, acoustic.LossReport(*means, len(y)), valid_ce))
    return reports


def rdln_training_pass(cfg, net, corpus, hmm, maps, params, n_epochs, hook=None):
    return training_pass(net, corpus, hmm, maps, params, n_epochs, cfg=cfg, hook=hook)


def validation_ce(net, utts, cfg, hmm, maps):
    total = 0.0
    frames = 0
    for utt in utts:
        post = infer_posteriors(net, utt, cfg, hmm, maps)
        total += frame_cross_entropy(post, utt.alignment) * utt.num_frames
        frames += utt.num_frames
    return total / frames
