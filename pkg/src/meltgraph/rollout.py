"""Autoregressive thermal prediction: each predicted frame feeds the next
step's features, mirroring how the solver chains timesteps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gnn import ModelParams, predict
from .meshgraph import FeatureVariant, MeshGraph, PropagationMatrix, assemble_features
from .scanpath import LaserSchedule
from .thermal import Frame, ThermalHistory


class RolloutDivergenceError(RuntimeError):
    """A rollout step produced a non-finite prediction."""


@dataclass
class RolloutResult:
    predicted: ThermalHistory
    rmse_per_step: list[float] | None  # present when truth was supplied
    schedule: LaserSchedule


def rollout(
    params: ModelParams,
    graph: MeshGraph,
    propagation: PropagationMatrix,
    schedule: LaserSchedule,
    initial_temperature: float,
    variant: FeatureVariant,
) -> ThermalHistory:
    """Chain inference-mode predictions over the schedule.

    Frame 0 is uniform at the initial temperature; frame t is predicted from
    frame t-1 and the focal nodes of schedule timestep t-1.
    """
    if params.input_width != variant.feature_width:
        raise ValueError(
            f"model input width {params.input_width} does not match variant "
            f"feature width {variant.feature_width}"
        )
    if graph.n_nodes != schedule.grid.n_nodes:
        raise ValueError("schedule grid does not match graph")
    current = np.full(graph.n_nodes, float(initial_temperature), dtype=np.float64)
    frames = [Frame(index=0, temps=current.astype(np.float32), focal_nodes=())]
    for t, entries in enumerate(schedule.steps):
        focal = tuple(node for _, node in entries)
        features = assemble_features(current, graph, focal, variant)
        current = predict(params, features, propagation)
        if not np.all(np.isfinite(current)):
            raise RolloutDivergenceError(f"non-finite prediction at timestep {t + 1}")
        frames.append(Frame(index=t + 1, temps=current.astype(np.float32), focal_nodes=focal))
    return ThermalHistory(grid=schedule.grid, frames=frames, dwell=schedule.dwell)


def error_curve(predicted: ThermalHistory, truth: ThermalHistory) -> list[float]:
    """Per-frame RMSE over all nodes; frame counts and sizes must match."""
    if predicted.n_frames != truth.n_frames:
        raise ValueError(
            f"frame counts differ: {predicted.n_frames} vs {truth.n_frames}"
        )
    curve = []
    for pf, tf in zip(predicted.frames, truth.frames):
        if pf.temps.size != tf.temps.size:
            raise ValueError("node counts differ between histories")
        err = pf.temps.astype(np.float64) - tf.temps.astype(np.float64)
        curve.append(float(np.sqrt(np.mean(err**2))))
    return curve


def rollout_vs_truth(
    params: ModelParams,
    graph: MeshGraph,
    propagation: PropagationMatrix,
    schedule: LaserSchedule,
    truth: ThermalHistory,
    variant: FeatureVariant,
    initial_temperature: float | None = None,
) -> RolloutResult:
    if initial_temperature is None:
        initial_temperature = float(truth.frames[0].temps[0])
    predicted = rollout(params, graph, propagation, schedule, initial_temperature, variant)
    return RolloutResult(
        predicted=predicted,
        rmse_per_step=error_curve(predicted, truth),
        schedule=schedule,
    )
