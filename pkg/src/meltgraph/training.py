"""Case-sequential training, dataset splits, freeze-and-retrain transfer, and
metric evaluation (RMSE / MAPE / peak APE).
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field, replace

import numpy as np

from .gnn import (
    AdamState,
    LossSpec,
    ModelParams,
    backward,
    forward,
    init_adam_state,
    init_params,
    loss_value,
    optimizer_step,
    predict,
)
from .meshgraph import ConcatSamples, FeatureVariant, samples_from_history

MAPE_FLOOR = 1e-6  # |target| below this is excluded from MAPE


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    val_fraction: float = 0.1
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0.0 for f in fracs):
            raise ValueError(f"split fractions must be positive, got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


@dataclass(frozen=True)
class TrainConfig:
    loss: LossSpec = LossSpec()
    learning_rate: float = 1e-3
    max_steps_per_case: int = 2000
    patience: int = 2000
    val_check_every: int = 50
    dropout: float = 0.1
    case_order: tuple[int, ...] | None = None
    seed: int = 0
    split: SplitSpec = SplitSpec()

    def __post_init__(self) -> None:
        if self.max_steps_per_case < 0 or self.patience <= 0:
            raise ValueError("step budget must be >= 0 and patience positive")


@dataclass
class TraceRow:
    case: int
    step: int
    train_loss: float
    val_loss: float  # nan between validation checks


@dataclass
class EvalReport:
    rmse: float
    mape: float
    peak_apes: list[float]
    max_peak_ape: float
    per_frame: list[tuple[int, float, float]]  # (timestep, rmse, mape)


def split_case(samples, spec: SplitSpec):
    """Seeded shuffle then contiguous slices; train floor, test remainder."""
    n = len(samples)
    if n < 3:
        raise ValueError(f"need at least 3 samples to split, got {n}")
    indices = list(range(n))
    random.Random(spec.seed).shuffle(indices)
    n_train = int(math.floor(n * spec.train_fraction))
    n_val = int(math.floor(n * spec.val_fraction))
    train = [samples[i] for i in indices[:n_train]]
    val = [samples[i] for i in indices[n_train : n_train + n_val]]
    test = [samples[i] for i in indices[n_train + n_val :]]
    return train, val, test


def _mean_loss(params: ModelParams, samples, spec: LossSpec) -> float:
    total = 0.0
    for sample in samples:
        y = predict(params, sample.features, sample.propagation)
        total += loss_value(spec, y, sample.target)
    return total / len(samples)


def _dropout_seed(base: int, case: int, step: int) -> int:
    return ((base * 1_000_003 + case) * 1_000_003 + step) % (2**63 - 1)


def _train_on(
    train_samples,
    val_samples,
    params: ModelParams,
    state: AdamState,
    config: TrainConfig,
    case_index: int,
    trace: list[TraceRow],
) -> tuple[ModelParams, AdamState]:
    """Optimizer steps over shuffled samples with validation early stopping."""
    if not train_samples or config.max_steps_per_case == 0:
        return params, state
    rng = random.Random(_dropout_seed(config.seed, case_index, 0))
    order = list(range(len(train_samples)))
    best_val = math.inf
    best_step = 0
    step = 0
    stop = False
    while step < config.max_steps_per_case and not stop:
        rng.shuffle(order)
        for idx in order:
            sample = train_samples[idx]
            y, cache = forward(
                params,
                sample.features,
                sample.propagation,
                dropout_seed=_dropout_seed(config.seed, case_index, step + 1),
                dropout_rate=config.dropout,
            )
            train_loss = loss_value(config.loss, y, sample.target)
            grads = backward(cache, config.loss, params, y, sample.target)
            params, state = optimizer_step(params, grads, state, config.learning_rate)
            step += 1
            val_loss = math.nan
            if val_samples and step % config.val_check_every == 0:
                val_loss = _mean_loss(params, val_samples, config.loss)
                if val_loss < best_val:
                    best_val = val_loss
                    best_step = step
                elif step - best_step >= config.patience:
                    trace.append(TraceRow(case_index, step, train_loss, val_loss))
                    stop = True
                    break
            trace.append(TraceRow(case_index, step, train_loss, val_loss))
            if step >= config.max_steps_per_case:
                break
    return params, state


def train_sequential(
    cases, config: TrainConfig, initial_params: ModelParams
) -> tuple[ModelParams, list[TraceRow]]:
    """Train on each case in order, warm-starting from the previous case.

    Each case is split 70/10/20 (per ``config.split``) with a per-case seed
    offset; only the train and validation slices are consumed here.
    """
    if len(cases) < 1:
        raise ValueError("need at least one case")
    order = config.case_order if config.case_order is not None else tuple(range(len(cases)))
    params = initial_params
    state = init_adam_state(params)
    trace: list[TraceRow] = []
    for position, case_index in enumerate(order):
        samples = cases[case_index]
        split = replace(config.split, seed=config.split.seed + position)
        train_samples, val_samples, _ = split_case(samples, split)
        params, state = _train_on(
            train_samples, val_samples, params, state, config, case_index, trace
        )
    return params, trace


def transfer_retrain(
    parent: ModelParams,
    freeze_last: int,
    new_samples,
    n_train: int,
    n_val: int,
    config: TrainConfig,
    seed: int,
) -> ModelParams:
    """Freeze the trailing layers and fine-tune the rest on a small seeded
    subset of the target-domain samples."""
    if freeze_last >= len(parent.layers):
        raise ValueError(f"freeze_last={freeze_last} leaves nothing trainable")
    if n_train + n_val > len(new_samples):
        raise ValueError(
            f"requested {n_train}+{n_val} samples but only {len(new_samples)} available"
        )
    params = parent.copy()
    for layer in params.layers[len(params.layers) - freeze_last :]:
        layer.frozen = True
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(new_samples), size=n_train + n_val, replace=False)
    train_samples = [new_samples[int(i)] for i in chosen[:n_train]]
    val_samples = [new_samples[int(i)] for i in chosen[n_train:]]
    state = init_adam_state(params)
    trace: list[TraceRow] = []
    params, _ = _train_on(train_samples, val_samples, params, state, config, 0, trace)
    return params


def evaluate_metrics(params: ModelParams, samples, peak_threshold: float = 1000.0) -> EvalReport:
    """Node-by-node metrics pooled over all samples.

    MAPE skips near-zero targets; peak APEs are collected at nodes whose
    target exceeds the threshold.
    """
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    total_sq = 0.0
    total_n = 0
    ape_sum = 0.0
    ape_n = 0
    peak_apes: list[float] = []
    per_frame: list[tuple[int, float, float]] = []
    for sample in samples:
        y = predict(params, sample.features, sample.propagation)
        t = sample.target
        err = y - t
        total_sq += float(np.sum(err**2))
        total_n += t.size
        mask = np.abs(t) > MAPE_FLOOR
        apes = np.abs(err[mask]) / np.abs(t[mask]) * 100.0
        ape_sum += float(np.sum(apes))
        ape_n += int(mask.sum())
        peak_mask = t > peak_threshold
        if np.any(peak_mask):
            peak_apes.extend(
                (np.abs(err[peak_mask]) / np.abs(t[peak_mask]) * 100.0).tolist()
            )
        frame_rmse = float(np.sqrt(np.mean(err**2)))
        frame_mape = float(np.mean(apes)) if apes.size else 0.0
        per_frame.append((sample.timestep, frame_rmse, frame_mape))
    return EvalReport(
        rmse=float(np.sqrt(total_sq / total_n)),
        mape=ape_sum / ape_n if ape_n else 0.0,
        peak_apes=peak_apes,
        max_peak_ape=max(peak_apes) if peak_apes else 0.0,
        per_frame=per_frame,
    )


def ml_candidate_rmse(
    a: int,
    b: float,
    c: float,
    train_histories,
    val_histories,
    graph,
    propagation,
    steps: int,
    learning_rate: float = 1e-3,
    seed: int = 0,
    dropout: float = 0.1,
    threshold: float = 1000.0,
    init_seed: int = 7,
) -> float:
    """Validation RMSE of a multi-laser model trained with a fixed budget.

    Used as the tuning objective: the candidate hyperparameters set the
    laser-column layout (a, b) and the peak loss weight (c); everything else
    is held fixed so candidates compare fairly.
    """
    variant = FeatureVariant.multi_laser(a, b)
    params = init_params("ML", variant.feature_width, init_seed, propagation.mode)
    train_pool = ConcatSamples(
        samples_from_history(h, graph, propagation, variant, f"train-{i}")
        for i, h in enumerate(train_histories)
    )
    val_pool = ConcatSamples(
        samples_from_history(h, graph, propagation, variant, f"val-{i}")
        for i, h in enumerate(val_histories)
    )
    config = TrainConfig(
        loss=LossSpec(kind="weighted", peak_weight=c, threshold=threshold),
        learning_rate=learning_rate,
        max_steps_per_case=steps,
        patience=max(steps, 1),
        dropout=dropout,
        seed=seed,
    )
    state = init_adam_state(params)
    trace: list[TraceRow] = []
    params, _ = _train_on(train_pool, [], params, state, config, 0, trace)
    return evaluate_metrics(params, val_pool, threshold).rmse


def write_trace_csv(path, trace: list[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case", "step", "train_loss", "val_loss"])
        for row in trace:
            writer.writerow([row.case, row.step, repr(row.train_loss), repr(row.val_loss)])


def write_eval_csv(path, params: ModelParams, samples, peak_threshold: float = 1000.0) -> None:
    """Node-level dump (sample, node, truth, prediction, APE) plus a summary row."""
    report = evaluate_metrics(params, samples, peak_threshold)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "node", "truth", "prediction", "ape_percent"])
        for si, sample in enumerate(samples):
            y = predict(params, sample.features, sample.propagation)
            for node in range(sample.target.size):
                truth = sample.target[node]
                ape = (
                    abs(y[node] - truth) / abs(truth) * 100.0
                    if abs(truth) > MAPE_FLOOR
                    else 0.0
                )
                writer.writerow([si, node, repr(float(truth)), repr(float(y[node])), repr(ape)])
        writer.writerow(
            ["summary", "", repr(report.rmse), repr(report.mape), repr(report.max_peak_ape)]
        )
