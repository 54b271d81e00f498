"""Mini-batch training loop and split evaluation.

The loop is deterministic under a fixed seed: model init, data synthesis,
and per-epoch shuffling each draw from named child streams of the root
seed, and gradients are reduced in fixed index order. Per-epoch records
(epoch, train loss, Se, Sp, Score) are appended to a line-delimited JSON
log.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .audio import preprocess
from .config import RunConfig
from .datasets import DatasetManifest, SynthConfig, build_synth, load_dataset
from .errors import NumericError, TrainingError, UndefinedMetricError
from .metrics import MetricsReport, compute_metrics, confusion_matrix
from .model import Model, seed_stream
from .optim import AdamState, adam_step
from .tensor import Tensor, mul

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class PreparedData:
    manifest: DatasetManifest
    features: list[np.ndarray]
    labels: list[int]
    train_idx: list[int]
    test_idx: list[int]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    se: float
    sp: float
    score: float

    def to_json(self) -> str:
        return json.dumps(
            {"type": "epoch", "epoch": self.epoch, "train_loss": self.train_loss,
             "se": self.se, "sp": self.sp, "score": self.score},
            sort_keys=True,
        )


@dataclass
class TrainResult:
    model: Model
    adam: AdamState
    history: list[EpochRecord]
    step_losses: list[float] = field(default_factory=list)
    log_lines: list[str] = field(default_factory=list)


def resolve_dataset(cfg: RunConfig) -> tuple[DatasetManifest, list]:
    if cfg.dataset == "synth":
        synth_cfg = SynthConfig(
            train_per_class=cfg.train_per_class,
            test_per_class=cfg.test_per_class,
            train_subjects=cfg.train_subjects,
            test_subjects=cfg.test_subjects,
            snr_db=(cfg.snr_lo, cfg.snr_hi),
        )
        return build_synth(synth_cfg, cfg.seed)
    split_file = cfg.split_file or os.path.join(cfg.dataset, "split.txt")
    return load_dataset(cfg.dataset, split_file)


def prepare_data(cfg: RunConfig, manifest: DatasetManifest | None = None,
                 clips: list | None = None) -> PreparedData:
    """Resolve the dataset and precompute every clip's spectrogram once."""
    if manifest is None or clips is None:
        manifest, clips = resolve_dataset(cfg)
    features = [preprocess(clip).values for clip in clips]
    labels = [int(entry.label) for entry in manifest.entries]
    return PreparedData(
        manifest, features, labels,
        manifest.split_indices("train"), manifest.split_indices("test"),
    )


def evaluate_indices(model: Model, data: PreparedData, indices: list[int]) -> MetricsReport:
    """Cycle-level evaluation: one prediction per clip, order-invariant."""
    if not indices:
        raise UndefinedMetricError("cannot evaluate an empty split")
    preds = [model.predict(data.features[i]) for i in indices]
    truths = [data.labels[i] for i in indices]
    return compute_metrics(confusion_matrix(truths, preds))


def evaluate_split(model: Model, data: PreparedData, split: str = "test") -> MetricsReport:
    return evaluate_indices(model, data, data.manifest.split_indices(split))


def _stratified_order(data: PreparedData, rng: np.random.Generator) -> list[int]:
    """Class-interleaved epoch order: each class list is shuffled, then the
    lists are round-robin merged so consecutive batches stay class-balanced.

    Balanced batches keep the gradient's common-mode term (driven by batch
    composition) from drowning the small discriminative signal at the tiny
    default learning rate.
    """
    by_class: dict[int, list[int]] = {}
    for i in data.train_idx:
        by_class.setdefault(data.labels[i], []).append(i)
    shuffled = []
    for label in sorted(by_class):
        idx = np.array(by_class[label])
        shuffled.append(list(idx[rng.permutation(len(idx))]))
    order: list[int] = []
    longest = max(len(lst) for lst in shuffled)
    for k in range(longest):
        for lst in shuffled:
            if k < len(lst):
                order.append(int(lst[k]))
    return order


def _batch_loss(model: Model, data: PreparedData, batch: list[int]) -> Tensor:
    total = None
    for i in batch:
        loss = model.sample_loss(data.features[i], data.labels[i])
        total = loss if total is None else total + loss
    return mul(1.0 / len(batch), total) if len(batch) > 1 else total


def header_line(cfg: RunConfig) -> str:
    return json.dumps({"type": "header", "config": cfg.snapshot()}, sort_keys=True)


def train(cfg: RunConfig, manifest: DatasetManifest | None = None, clips: list | None = None,
          log_path: str | None = None, max_steps: int | None = None) -> TrainResult:
    """Run Adam over the hybrid loss; returns the model, state, and history.

    Metrics in each epoch record are computed on the test split when one
    exists, otherwise on the training split. A non-finite loss aborts with
    a diagnostic naming the epoch and step.
    """
    data = prepare_data(cfg, manifest, clips)
    if not data.train_idx:
        raise TrainingError("training split is empty")
    model = Model(cfg, rng=seed_stream(cfg.seed, "init"))
    shuffle_rng = seed_stream(cfg.seed, "shuffle")
    adam = AdamState()
    result = TrainResult(model, adam, [], [], [header_line(cfg)])
    metric_idx = data.test_idx if data.test_idx else data.train_idx

    steps_done = 0
    for epoch in range(cfg.epochs):
        order = _stratified_order(data, shuffle_rng)
        epoch_loss = 0.0
        seen = 0
        for lo in range(0, len(order), cfg.batch):
            batch = order[lo : lo + cfg.batch]
            model.zero_grads()
            try:
                loss = _batch_loss(model, data, batch)
                value = loss.item()
                loss.backward()
                trainable = model.trainable()
                adam_step(trainable, {n: p.grad for n, p in trainable.items()}, adam,
                          lr=cfg.lr, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS,
                          weight_decay=cfg.weight_decay)
            except NumericError as exc:
                raise TrainingError(f"non-finite loss at epoch {epoch} step {steps_done}: {exc}") from exc
            result.step_losses.append(value)
            epoch_loss += value * len(batch)
            seen += len(batch)
            steps_done += 1
            if max_steps is not None and steps_done >= max_steps:
                break
        report = evaluate_indices(model, data, metric_idx)
        record = EpochRecord(epoch, epoch_loss / max(seen, 1), report.se, report.sp, report.score)
        result.history.append(record)
        result.log_lines.append(record.to_json())
        if max_steps is not None and steps_done >= max_steps:
            break

    if log_path:
        os.makedirs(os.path.dirname(log_path) or ".", exist_ok=True)
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(result.log_lines) + "\n")
    return result
