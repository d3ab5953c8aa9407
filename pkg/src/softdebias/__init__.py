"""Word-embedding debiasing with a linear transform or a residual network,
plus MAC, Stereotype Score, CrowS-Pairs and downstream-accuracy checks."""

from .baseline import baseline_loss, factor, train_baseline
from .bias_space import BiasSpec, BiasSubspace, NeutralSet, build_subspace, default_spec, direct_bias, neutral_set, projection_energy
from .config import TrainConfig, default_hypers
from .dsd import DebiasNet, dsd_loss, forward, gram_drift, train_dsd
from .embeddings import EmbeddingSet, cosine, load_word2vec_text, normalize_rows, save_word2vec_text, sentence_vector
from .errors import BiasSpecError, DataError, DivergenceError, EmbeddingFormatError, SoftDebiasError
from .metrics import crows_score, mac, mac_significance, stereotype_score

__version__ = "0.1.0"
