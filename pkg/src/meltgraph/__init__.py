"""meltgraph: thermal-history generation and GNN surrogates for laser
powder-bed-fusion scan plans."""

__version__ = "0.1.0"

from .material import MaterialTable, ProcessParams, interpolate_property, validate_table
from .scanpath import GridSpec, LaserSchedule, ScanPlan, compile_schedule
from .thermal import GoldakParams, ThermalHistory, ThermalState, simulate
from .meshgraph import (
    FeatureVariant,
    GraphSample,
    MeshGraph,
    PropagationMatrix,
    assemble_features,
    grid_to_graph,
    propagation_matrix,
)
from .gnn import LossSpec, ModelParams, backward, forward, init_params, optimizer_step
from .training import EvalReport, SplitSpec, TrainConfig, evaluate_metrics, split_case
from .gpbo import HyperBounds, HyperPoint, expected_improvement, tune
from .rollout import RolloutResult, error_curve, rollout
from .storage import load_checkpoint, load_history, persist_checkpoint, persist_history

__all__ = [
    "MaterialTable",
    "ProcessParams",
    "interpolate_property",
    "validate_table",
    "GridSpec",
    "LaserSchedule",
    "ScanPlan",
    "compile_schedule",
    "GoldakParams",
    "ThermalHistory",
    "ThermalState",
    "simulate",
    "FeatureVariant",
    "GraphSample",
    "MeshGraph",
    "PropagationMatrix",
    "assemble_features",
    "grid_to_graph",
    "propagation_matrix",
    "LossSpec",
    "ModelParams",
    "backward",
    "forward",
    "init_params",
    "optimizer_step",
    "EvalReport",
    "SplitSpec",
    "TrainConfig",
    "evaluate_metrics",
    "split_case",
    "HyperBounds",
    "HyperPoint",
    "expected_improvement",
    "tune",
    "RolloutResult",
    "error_curve",
    "rollout",
    "load_checkpoint",
    "load_history",
    "persist_checkpoint",
    "persist_history",
]
