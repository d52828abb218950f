"""seqbind: deep architectures for DNA/RNA protein-binding prediction.

Composable CNN/RNN/hybrid sequence classifiers over one-hot or k-mer
embedding inputs, trained by a reproducible random-search calibration,
with signed-rank model comparison and motif extraction from the first
convolutional layer.
"""

from .arch import ArchSpec, HyperConfig, PRESETS, build_model, expand_filters, preset
from .data import Dataset, RawSequence, dinuc_shuffle, encode_onehot, make_folds, tokenize_kmers
from .embedding import build_vocab, embed_sequence, train_word2vec
from .errors import ConfigError, DataError, SeqBindError, ShapeMismatch, TrainingDiverged
from .evaluate import compare_models, roc_auc, roc_curve, stratify_by_size, wilcoxon_signed_rank
from .motif import PFM, activation_histogram, build_pfm, export_meme, extract_fragments
from .selection import calibrate, finalize, sample_hyperparams, select_model
from .synth import PlantSpec, generate, two_motif_spaced
from .training import bce_loss, train_model

__version__ = "0.1.0"
