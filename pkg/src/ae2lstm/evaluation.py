"""Six-metric report, stratified k-fold plans and the repeated-seed harness.

Poor outcome (label 1) is the positive class. Scores are thresholded with
``p >= threshold`` (ties count as positive). Aggregates use the population
standard deviation (ddof=0).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import Ae2LstmError, UsageError
from .rng import Rng

log = logging.getLogger(__name__)

METRICS = ("auc", "mae", "accuracy", "specificity", "sensitivity", "f1")


@dataclass
class MetricsReport:
    auc: float
    mae: float
    accuracy: float
    specificity: float
    sensitivity: float
    f1: float
    n: int
    threshold: float = 0.5
    mae_hard: float = float("nan")
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float:
    return num / den if den else float("nan")


def rank_auc(scores, labels) -> float:
    """AUC via the Mann-Whitney rank-sum; tied scores get average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    start = 0
    while start < scores.size:
        stop = start
        while stop + 1 < scores.size and sorted_scores[stop + 1] == sorted_scores[start]:
            stop += 1
        ranks[order[start:stop + 1]] = (start + stop) / 2 + 1
        start = stop + 1
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def compute_metrics(probs, labels, threshold: float = 0.5) -> MetricsReport:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape != labels.shape or probs.ndim != 1 or probs.size == 0:
        raise UsageError(f"probs {probs.shape} and labels {labels.shape} must be equal-length, non-empty")
    if not np.all((probs >= 0) & (probs <= 1)):
        raise UsageError("probabilities must lie in [0, 1]")
    if not np.all((labels == 0) | (labels == 1)):
        raise UsageError("labels must be 0 or 1")
    pred = (probs >= threshold).astype(int)
    tp = int(np.sum((pred == 1) & (labels == 1)))
    tn = int(np.sum((pred == 0) & (labels == 0)))
    fp = int(np.sum((pred == 1) & (labels == 0)))
    fn = int(np.sum((pred == 0) & (labels == 1)))
    n = labels.size
    return MetricsReport(
        auc=rank_auc(probs, labels),
        mae=float(np.mean(np.abs(probs - labels))),
        accuracy=(tp + tn) / n,
        specificity=_ratio(tn, tn + fp),
        sensitivity=_ratio(tp, tp + fn),
        # equals 2PR/(P+R) whenever both are defined, 0 when TP = 0 but positives exist
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        n=n,
        threshold=threshold,
        mae_hard=float(np.mean(np.abs(pred - labels))),
        tp=tp, tn=tn, fp=fp, fn=fn,
    )


def majority_baseline(cohort) -> MetricsReport:
    """Every patient gets p = poor-outcome rate; the hard class is then the majority class."""
    labels = np.array([r.binary_label for r in cohort])
    if labels.size == 0 or labels.min() == labels.max():
        raise UsageError("majority baseline needs both outcome classes")
    return compute_metrics(np.full(labels.size, labels.mean()), labels)


# ---------------------------------------------------------------------------
# fold plans


@dataclass
class FoldPlan:
    k: int
    folds: list[tuple[list[str], list[str]]]  # (train ids, test ids)
    stratified: bool = True
    seed: int = 0


def _ids_labels(cohort):
    items = list(cohort)
    return [r.id for r in items], [int(r.binary_label) for r in items]


def make_folds(cohort, k: int = 5, seed: int = 0, stratified: bool = True) -> FoldPlan:
    """Deal shuffled patients round-robin into k test folds.

    With ``stratified`` each class is dealt separately, continuing from the
    fold where the previous class stopped, so fold sizes differ by at most one
    and every fold holds floor or ceil of n_class / k of each class.
    """
    ids, labels = _ids_labels(cohort)
    if k < 2:
        raise UsageError(f"k must be >= 2, got {k}")
    if k > len(ids):
        raise UsageError(f"k={k} exceeds cohort size {len(ids)}")
    rng = Rng(seed)
    groups = [[i for i, y in zip(ids, labels) if y == c] for c in sorted(set(labels))] if stratified else [ids]
    test = [[] for _ in range(k)]
    slot = 0
    for group in groups:
        for pid in rng.shuffle(group):
            test[slot % k].append(pid)
            slot += 1
    folds = []
    for f in range(k):
        held = set(test[f])
        folds.append(([i for i in ids if i not in held], [i for i in ids if i in held]))
    return FoldPlan(k, folds, stratified, seed)


# ---------------------------------------------------------------------------
# repeated runs


@dataclass
class RunSummary:
    runs: list[MetricsReport]
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)
    baseline: MetricsReport | None = None
    seeds: list[int] = field(default_factory=list)

    @classmethod
    def aggregate(cls, runs: Sequence[MetricsReport], baseline=None, seeds=()) -> "RunSummary":
        table = {m: np.array([getattr(r, m) for r in runs], dtype=np.float64) for m in METRICS}
        return cls(list(runs), {m: float(np.mean(v)) for m, v in table.items()},
                   {m: float(np.std(v, ddof=0)) for m, v in table.items()}, baseline, list(seeds))

    def to_table(self) -> str:
        """Tab-separated: one row per metric, per-run columns, then mean and std."""
        header = ["metric", *(f"run{r}" for r in range(len(self.runs))), "mean", "std"]
        if self.baseline is not None:
            header.append("majority_baseline")
        lines = ["\t".join(header)]
        for m in METRICS:
            row = [m, *(f"{getattr(r, m):.6f}" for r in self.runs), f"{self.mean[m]:.6f}", f"{self.std[m]:.6f}"]
            if self.baseline is not None:
                row.append(f"{getattr(self.baseline, m):.6f}")
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "std_convention": "population",
            "seeds": self.seeds,
            "metrics": {m: {"runs": [getattr(r, m) for r in self.runs], "mean": self.mean[m], "std": self.std[m]}
                        for m in METRICS},
            "runs": [r.as_dict() for r in self.runs],
            "majority_baseline": self.baseline.as_dict() if self.baseline is not None else None,
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


FitPredict = Callable[[list, list, object, int], np.ndarray]


class RunError(Ae2LstmError):
    def __init__(self, run: int, cause: Exception):
        super().__init__(f"run {run}: {cause}")
        self.run = run
        self.kind = getattr(cause, "kind", "error")


def run_experiment(cohort, config, n_runs: int | None = None, base_seed: int | None = None,
                   fit_predict: FitPredict | None = None) -> RunSummary:
    """Repeat k-fold cross-validation with seeds base_seed + r.

    For each run the held-out predictions of all folds are pooled before the
    metrics are computed. ``fit_predict(train_records, test_records, config,
    seed)`` returns test-set probabilities; the default trains the full
    autoencoder + LSTM pipeline.
    """
    from .pipeline import fit_predict as default_fit_predict

    fit_predict = fit_predict or default_fit_predict
    n_runs = config.n_runs if n_runs is None else n_runs
    base_seed = config.seed if base_seed is None else base_seed
    records = list(cohort)
    labels = np.array([r.binary_label for r in records])
    if labels.min() == labels.max():
        raise UsageError("cohort must contain both outcome classes")
    if n_runs < 1:
        raise UsageError("n_runs must be >= 1")
    by_id = {r.id: r for r in records}
    runs, seeds = [], []
    for run in range(n_runs):
        seed = base_seed + run
        try:
            plan = make_folds(records, config.k_folds, seed, stratified=True)
            probs = {}
            for f, (train_ids, test_ids) in enumerate(plan.folds):
                test = [by_id[i] for i in test_ids]
                p = fit_predict([by_id[i] for i in train_ids], test, config, seed * 1000 + f)
                probs.update(zip(test_ids, np.asarray(p, dtype=np.float64)))
            ids = [r.id for r in records]
            report = compute_metrics([probs[i] for i in ids], [by_id[i].binary_label for i in ids])
        except Ae2LstmError as exc:
            raise RunError(run, exc) from exc
        log.info("run %d (seed %d): auc %.3f acc %.3f", run, seed, report.auc, report.accuracy)
        runs.append(report)
        seeds.append(seed)
    return RunSummary.aggregate(runs, majority_baseline(records), seeds)
