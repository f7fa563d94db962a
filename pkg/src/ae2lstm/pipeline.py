"""End-to-end glue: fusion AEs on training slices, feature encoding, LSTM."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .fusion import FeatureSequence, FusionStack, encode_patient, pool_slices, train_fusion
from .lstm import LstmModel, LstmTrainResult, lstm_forward, split_validation, train_lstm
from .rng import Rng

log = logging.getLogger(__name__)


@dataclass
class TrainedPipeline:
    stack: FusionStack
    lstm: LstmTrainResult
    ae_traces: dict[str, list[float]]


def fit_fusion(records, config: PipelineConfig, seed: int) -> tuple[FusionStack, dict]:
    slices = pool_slices(records, config.drop_empty_slices)
    return train_fusion(slices, config.d, config.fusion_size, config.ae_train_config(seed),
                        rho=config.rho, beta=config.beta, lam=config.lam)


def encode_all(stack: FusionStack, records, config: PipelineConfig) -> list[FeatureSequence]:
    return [encode_patient(stack, r, config.drop_empty_slices) for r in records]


def fit_lstm(seqs: list[FeatureSequence], config: PipelineConfig, seed: int) -> LstmTrainResult:
    seeds = Rng(seed)
    init, split, shuffle = seeds.spawn(), seeds.next_u64(), seeds.next_u64()
    train, val = split_validation(seqs, config.val_fraction, split)
    model = LstmModel(seqs[0].features.shape[1], config.nh, rng=init)
    return train_lstm(model, train, val, config.lstm_train_config(shuffle))


def train_pipeline(records, config: PipelineConfig, seed: int, stack: FusionStack | None = None) -> TrainedPipeline:
    """Both training stages; pass ``stack`` to reuse already trained autoencoders."""
    seeds = Rng(seed)
    ae_seed, lstm_seed = seeds.next_u64(), seeds.next_u64()
    traces = {}
    if stack is None:
        stack, traces = fit_fusion(records, config, ae_seed)
    seqs = encode_all(stack, records, config)
    return TrainedPipeline(stack, fit_lstm(seqs, config, lstm_seed), traces)


def fit_predict(train_records, test_records, config: PipelineConfig, seed: int) -> np.ndarray:
    trained = train_pipeline(train_records, config, seed)
    seqs = encode_all(trained.stack, test_records, config)
    return np.array([lstm_forward(trained.lstm.model, s) for s in seqs])
