"""Anomaly detection for tabular data by disentangling correlated
attribute subsets with multi-head self-attention over an autoencoder.

Normal samples are assumed to contain internally correlated, mutually
independent attribute subsets; two attention heads are pushed apart by a
cosine penalty on their attention maps so that each reconstructs the
sample from one subset's correlation structure. Anomalies break that
structure and reconstruct badly, which is the score.
"""

__version__ = "0.1.0"

from . import autodiff, kernels  # noqa: F401
from .checkpoint import CheckpointBundle, load_checkpoint, save_checkpoint  # noqa: F401
from .data import load_csv, load_registry, resolve_dataset  # noqa: F401
from .experiment import (  # noqa: F401
    ExperimentConfig,
    export_attention_maps,
    load_experiment_config,
    run_experiment,
    validate_config,
)
from .metrics import auc_pr, auc_roc, make_report  # noqa: F401
from .model import ModelConfig, anomaly_scores, fit, init_params  # noqa: F401
from .errors import (  # noqa: F401
    ConfigError,
    DatasetError,
    DegenerateInputError,
    GradientMissingError,
    NonFiniteError,
    ParseError,
    ShapeMismatchError,
    TrainingDivergedError,
)
