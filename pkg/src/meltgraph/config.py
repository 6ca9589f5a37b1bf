"""Run configuration: a single JSON file drives every CLI command.

The built-in defaults reproduce the reference property table and process
constants exactly; any field can be overridden. The effective heat-transfer
coefficient is configured in the conventional W/(m^2 degC) and converted to
internal mm units once at load time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .gnn import LossSpec
from .material import (
    IN625_CONDUCTIVITY,
    IN625_DENSITY,
    IN625_EXPANSION,
    IN625_SPECIFIC_HEAT,
    MaterialTable,
    ProcessParams,
    validate_table,
)
from .scanpath import GridSpec
from .training import SplitSpec, TrainConfig

M2_TO_MM2 = 1e-6


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


DEFAULT_GRIDS = {
    "A": {"side_length_mm": 2.0, "node_spacing_mm": 0.05},
    "B": {"side_length_mm": 3.0, "node_spacing_mm": 0.05},
    "C": {"side_length_mm": 4.0, "node_spacing_mm": 0.05},
}


def default_config_dict() -> dict:
    return {
        "material": {
            "conductivity_points": [list(p) for p in IN625_CONDUCTIVITY],
            "expansion_points": [list(p) for p in IN625_EXPANSION],
            "specific_heat_points": [list(p) for p in IN625_SPECIFIC_HEAT],
            "density_g_mm3": IN625_DENSITY,
        },
        "process": {
            "scan_speed_mm_s": 1200.0,
            "laser_radius_mm": 0.05,
            "power_w": 195.0,
            "absorptivity": 0.4,
            "substrate_temperature_c": 80.0,
            "ambient_temperature_c": 25.0,
            "effective_htc_w_m2": 25.0,
            "plate_thickness_mm": 0.02,
            "substrate_htc_w_mm2": 2.0e-3,
        },
        "grids": dict(DEFAULT_GRIDS),
        "training": {
            "loss": {"kind": "mse", "peak_weight": 1.0, "threshold_c": 1000.0},
            "learning_rate": 1e-3,
            "max_steps_per_case": 2000,
            "patience": 2000,
            "val_check_every": 50,
            "dropout": 0.1,
            "split": {"train": 0.7, "val": 0.1, "test": 0.2},
        },
        "transfer": {"freeze_last": 2, "n_train": 14, "n_val": 2},
        "gpbo": {
            "bounds": {"a": [1, 4], "b": [1.0, 1000.0], "c": [1.0, 1.0e4]},
            "n_init": 5,
            "n_iter": 25,
            "candidate_steps": 600,
        },
        "seed": 0,
        "output_dir": "out",
    }


@dataclass
class RunConfig:
    material: MaterialTable
    process: ProcessParams
    grids: dict[str, GridSpec]
    training: TrainConfig
    transfer: dict
    gpbo: dict
    seed: int
    output_dir: Path
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode("utf-8")
        ).hexdigest()


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def material_from_dict(data: dict) -> MaterialTable:
    try:
        table = MaterialTable(
            conductivity_points=tuple(tuple(p) for p in data["conductivity_points"]),
            expansion_points=tuple(tuple(p) for p in data["expansion_points"]),
            specific_heat_points=tuple(tuple(p) for p in data["specific_heat_points"]),
            density=float(data["density_g_mm3"]),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad material section: {exc}") from exc
    problems = validate_table(table)
    if problems:
        raise ConfigError("invalid material table: " + "; ".join(problems))
    return table


def process_from_dict(data: dict) -> ProcessParams:
    try:
        return ProcessParams(
            scan_speed=float(data["scan_speed_mm_s"]),
            laser_radius=float(data["laser_radius_mm"]),
            power=float(data["power_w"]),
            absorptivity=float(data["absorptivity"]),
            substrate_temperature=float(data["substrate_temperature_c"]),
            ambient_temperature=float(data["ambient_temperature_c"]),
            effective_htc=float(data["effective_htc_w_m2"]) * M2_TO_MM2,
            plate_thickness=float(data["plate_thickness_mm"]),
            substrate_htc=float(data["substrate_htc_w_mm2"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad process section: {exc}") from exc


def training_from_dict(data: dict, seed: int) -> TrainConfig:
    loss_data = data.get("loss", {})
    split_data = data.get("split", {})
    try:
        loss = LossSpec(
            kind=loss_data.get("kind", "mse"),
            peak_weight=float(loss_data.get("peak_weight", 1.0)),
            threshold=float(loss_data.get("threshold_c", 1000.0)),
        )
        split = SplitSpec(
            train_fraction=float(split_data.get("train", 0.7)),
            val_fraction=float(split_data.get("val", 0.1)),
            test_fraction=float(split_data.get("test", 0.2)),
            seed=seed,
        )
        return TrainConfig(
            loss=loss,
            learning_rate=float(data.get("learning_rate", 1e-3)),
            max_steps_per_case=int(data.get("max_steps_per_case", 2000)),
            patience=int(data.get("patience", 2000)),
            val_check_every=int(data.get("val_check_every", 50)),
            dropout=float(data.get("dropout", 0.1)),
            seed=seed,
            split=split,
        )
    except ValueError as exc:
        raise ConfigError(f"bad training section: {exc}") from exc


def load_config(path=None, overrides: dict | None = None, seed: int | None = None) -> RunConfig:
    """Defaults, optionally merged with a JSON file and explicit overrides."""
    raw = default_config_dict()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        raw = _merge(raw, data)
    if overrides:
        raw = _merge(raw, overrides)
    if seed is not None:
        raw["seed"] = int(seed)

    grids = {}
    for label, spec in raw["grids"].items():
        try:
            grids[label] = GridSpec.square(
                float(spec["side_length_mm"]), float(spec["node_spacing_mm"])
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad grid {label!r}: {exc}") from exc

    run_seed = int(raw.get("seed", 0))
    return RunConfig(
        material=material_from_dict(raw["material"]),
        process=process_from_dict(raw["process"]),
        grids=grids,
        training=training_from_dict(raw.get("training", {}), run_seed),
        transfer=dict(raw.get("transfer", {})),
        gpbo=dict(raw.get("gpbo", {})),
        seed=run_seed,
        output_dir=Path(raw.get("output_dir", "out")),
        raw=raw,
    )
