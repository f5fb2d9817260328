"""Desk-scale DNN-HMM laboratory for feeding transition-model state predictions
back into acoustic-model training."""

from .acoustic import AcousticNet, forward, init_net, load_checkpoint, loss_and_gradients, save_checkpoint, sgd_step
from .corpus import Corpus, Utterance, generate_corpus, load_corpus, sample_utterance, save_corpus
from .decode import (forced_align, predict_context_dependent, predict_context_independent,
                     trellis_step, viterbi_decode)
from .errors import (AlignmentError, ConfigError, DecodeError, LoadError, ParameterError,
                     RdlnError, TrainingError)
from .hmm import HmmModel, StateMaps, build_hmm, build_state_maps, emission_loglik
from .rdln import VariantConfig, all_variants

__version__ = "0.1.0"
