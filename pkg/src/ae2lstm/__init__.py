"""Stroke-outcome prediction from multimodal MRI: per-modality sparse
autoencoders, a fusion autoencoder over their codes, and a two-layer LSTM
over the resulting per-slice feature sequence."""

from .cohort import Cohort, PatientRecord, binarize_mrs, normalize_volume
from .config import PipelineConfig, load_config
from .evaluation import MetricsReport, RunSummary, compute_metrics, make_folds, majority_baseline, run_experiment
from .fusion import FeatureSequence, FusionStack, Modality, encode_patient, encode_slice, train_fusion
from .lstm import LstmModel, LstmTrainConfig, lstm_forward, lstm_loss, predict, train_lstm
from .nifti import Volume, parse_nifti, write_nifti
from .rng import Rng
from .sparse_ae import AeTrainConfig, SparseAE, ae_loss, train_ae
from .synthetic import generate_synthetic_cohort

__version__ = "0.1.0"
