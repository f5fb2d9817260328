"""File-level pipeline steps shared by the CLI and the acceptance tests.

Everything an experiment writes lives under ``cfg.output_dir``:

==============================  =========================================
``hmm.txt``                     ground-truth model (``hmm v1``)
``corpus.txt``                  synthetic corpus (``corpus v1``)
``checkpoints/<arm>-epoch-NN.acn``  network after epoch NN (``ACN1``)
``metrics-<arm>.txt``           per-epoch metrics
``curves.txt``                  merged baseline/RDLN curve table
``eval-report.txt``             output of ``eval``
==============================  =========================================
"""

import logging
import os

from . import acoustic
from .corpus import generate_corpus, load_corpus, save_corpus
from .curves import dumps_curves, merge_curves
from .errors import ConfigError
from .evaluation import EpochMetrics, evaluate_decoding, load_metrics, save_metrics
from .hmm import build_hmm, build_state_maps, load_hmm, save_hmm
from .rdln import INPUT_STACK, TrainParams, training_pass

log = logging.getLogger(__name__)

BASELINE = "baseline"
RDLN = "rdln"


def hmm_path(cfg):
    return os.path.join(cfg.output_dir, "hmm.txt")


def corpus_path(cfg):
    return os.path.join(cfg.output_dir, "corpus.txt")


def checkpoint_path(cfg, arm, epoch):
    return os.path.join(cfg.output_dir, "checkpoints", f"{arm}-epoch-{epoch:02d}.acn")


def metrics_path(cfg, arm):
    return os.path.join(cfg.output_dir, f"metrics-{arm}.txt")


def curves_path(cfg):
    return os.path.join(cfg.output_dir, "curves.txt")


def eval_report_path(cfg):
    return os.path.join(cfg.output_dir, "eval-report.txt")


def build_model(cfg):
    return build_hmm(cfg.num_phones, cfg.states_per_phone, cfg.feature_dim,
                     cfg.self_loop_prob, cfg.seed, mean_scale=cfg.mean_scale)


def generate(cfg, force=False):
    paths = [hmm_path(cfg), corpus_path(cfg)]
    existing = [p for p in paths if os.path.exists(p)]
    if existing and not force:
        raise ConfigError(f"refusing to overwrite {', '.join(existing)} (use --force)")
    hmm = build_model(cfg)
    corpus = generate_corpus(hmm, cfg.n_utts, cfg.split_ratio, cfg.seed,
                             cfg.min_frames, cfg.max_frames)
    os.makedirs(cfg.output_dir, exist_ok=True)
    save_hmm(hmm, paths[0])
    save_corpus(corpus, paths[1], hmm)
    return hmm, corpus


def load_data(cfg):
    for p in (hmm_path(cfg), corpus_path(cfg)):
        if not os.path.exists(p):
            raise ConfigError(f"missing {p}; run 'generate' first")
    hmm = load_hmm(hmm_path(cfg))
    if (hmm.num_phones, hmm.states_per_phone, hmm.feature_dim) != (
            cfg.num_phones, cfg.states_per_phone, cfg.feature_dim):
        raise ConfigError("stored HMM dimensions disagree with the configuration")
    return hmm, load_corpus(corpus_path(cfg), hmm)


def _params(cfg):
    return TrainParams(cfg.learning_rate, cfg.batch_size, cfg.seed)


def _run_epochs(cfg, arm, net, variant, hmm, corpus, n_epochs):
    maps = build_state_maps(hmm)
    os.makedirs(os.path.dirname(checkpoint_path(cfg, arm, 0)), exist_ok=True)
    rows = []
    for _ in range(n_epochs):
        rep = training_pass(net, corpus, hmm, maps, _params(cfg), 1, cfg=variant)[0]
        acoustic.save_checkpoint(net, checkpoint_path(cfg, arm, rep.epoch))
        dec = evaluate_decoding(net, corpus.valid, hmm, maps, variant)
        row = EpochMetrics(arm, rep.epoch, rep.train.primary_ce, rep.valid_ce, dec.valid_wer)
        log.info("%s", row.to_line())
        rows.append(row)
    save_metrics(rows, metrics_path(cfg, arm))
    return rows


def train_baseline(cfg):
    hmm, corpus = load_data(cfg)
    net = acoustic.init_net(cfg.layer_dims(), cfg.seed)
    return _run_epochs(cfg, BASELINE, net, None, hmm, corpus, cfg.epochs)


def warm_start_net(cfg, maps):
    path = checkpoint_path(cfg, BASELINE, cfg.warm_start_epoch)
    if not os.path.exists(path):
        raise ConfigError(f"warm-start checkpoint not found: {path} (train the baseline arm first)")
    net = acoustic.load_checkpoint(path)
    if net.epoch != cfg.warm_start_epoch or net.input_dim != cfg.feature_dim:
        raise ConfigError(f"{path} does not hold a baseline net at epoch {cfg.warm_start_epoch}")
    if cfg.variant.incorporation == INPUT_STACK:
        net = acoustic.widen_input(net, cfg.variant.language_dim(maps))
    return net


def train_rdln(cfg):
    hmm, corpus = load_data(cfg)
    net = warm_start_net(cfg, build_state_maps(hmm))
    return _run_epochs(cfg, RDLN, net, cfg.variant, hmm, corpus, cfg.epochs - cfg.warm_start_epoch)


def evaluate(cfg, checkpoint=None, oracle=False):
    hmm, corpus = load_data(cfg)
    maps = build_state_maps(hmm)
    if oracle:
        net, variant, arm = None, None, "oracle"
    else:
        if not checkpoint or not os.path.exists(checkpoint):
            raise ConfigError(f"checkpoint not found: {checkpoint}")
        net = acoustic.load_checkpoint(checkpoint)
        if net.input_dim == cfg.feature_dim:
            variant, arm = None, BASELINE
            if cfg.variant.incorporation != INPUT_STACK and net.epoch > cfg.warm_start_epoch:
                variant, arm = cfg.variant, RDLN
        elif net.input_dim == cfg.variant.input_dim(cfg.feature_dim, maps):
            variant, arm = cfg.variant, RDLN
        else:
            raise ConfigError(f"checkpoint input dim {net.input_dim} fits neither arm")
    train = evaluate_decoding(net, corpus.train, hmm, maps, variant, oracle)
    valid = evaluate_decoding(net, corpus.valid, hmm, maps, variant, oracle)
    row = EpochMetrics(arm, 0 if net is None else net.epoch, train.valid_ce, valid.valid_ce, valid.valid_wer)
    os.makedirs(cfg.output_dir, exist_ok=True)
    save_metrics([row], eval_report_path(cfg))
    return row


def curves(cfg, baseline=None, rdln=None, out=None):
    rows = merge_curves(load_metrics(baseline or metrics_path(cfg, BASELINE)),
                        load_metrics(rdln or metrics_path(cfg, RDLN)))
    text = dumps_curves(rows)
    with open(out or curves_path(cfg), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return rows
