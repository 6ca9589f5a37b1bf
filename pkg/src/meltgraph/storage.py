"""Versioned binary containers for thermal histories (MGTH) and model
checkpoints (MGCK). All integers and floats are little-endian; round trips
are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .gnn import Layer, LossSpec, ModelParams
from .scanpath import GridSpec
from .thermal import Frame, ThermalHistory

HISTORY_MAGIC = b"MGTH"
CHECKPOINT_MAGIC = b"MGCK"
HISTORY_VERSION = 1
CHECKPOINT_VERSION = 1


class FormatError(ValueError):
    """Corrupt or unsupported container contents."""


class TruncationError(ValueError):
    """File ended before the declared payload."""


@dataclass(frozen=True)
class CheckpointMeta:
    iterations: int = 0
    loss: LossSpec = LossSpec()
    seed: int = 0


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncationError(f"truncated while reading {what}")
    return data


def persist_history(history: ThermalHistory, path) -> None:
    nx, ny = history.grid.node_counts
    with open(path, "wb") as fh:
        fh.write(HISTORY_MAGIC)
        fh.write(
            struct.pack(
                "<IIII", HISTORY_VERSION, nx, ny, history.n_frames
            )
        )
        fh.write(struct.pack("<dd", history.dwell, history.grid.node_spacing))
        for frame in history.frames:
            if frame.temps.size != nx * ny:
                raise FormatError(
                    f"frame {frame.index} has {frame.temps.size} temps, expected {nx * ny}"
                )
            fh.write(struct.pack("<IH", frame.index, len(frame.focal_nodes)))
            for node in frame.focal_nodes:
                fh.write(struct.pack("<I", node))
            fh.write(np.asarray(frame.temps, dtype="<f4").tobytes())


def load_history(path) -> ThermalHistory:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != HISTORY_MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte offset 0")
        header = _read_exact(fh, 16, "history header")
        version, nx, ny, n_frames = struct.unpack("<IIII", header)
        if version > HISTORY_VERSION:
            raise FormatError(f"unsupported history version {version} at byte offset 4")
        dwell, spacing = struct.unpack("<dd", _read_exact(fh, 16, "history header floats"))
        grid = GridSpec(
            side_length=(nx - 1) * spacing, node_spacing=spacing, node_counts=(nx, ny)
        )
        n_nodes = nx * ny
        frames = []
        for fi in range(n_frames):
            try:
                idx, n_focal = struct.unpack("<IH", _read_exact(fh, 6, f"frame {fi} header"))
                focal = tuple(
                    struct.unpack("<I", _read_exact(fh, 4, f"frame {fi} focal node"))[0]
                    for _ in range(n_focal)
                )
                raw = _read_exact(fh, 4 * n_nodes, f"frame {fi} temperatures")
            except TruncationError as exc:
                raise TruncationError(f"history truncated at frame {fi}: {exc}") from exc
            temps = np.frombuffer(raw, dtype="<f4").copy()
            frames.append(Frame(index=idx, temps=temps, focal_nodes=focal))
        return ThermalHistory(grid=grid, frames=frames, dwell=dwell)


def _write_string(fh, text: str) -> None:
    data = text.encode("utf-8")
    if len(data) > 255:
        raise FormatError(f"string too long for container: {text!r}")
    fh.write(struct.pack("<B", len(data)))
    fh.write(data)


def _read_string(fh, what: str) -> str:
    (n,) = struct.unpack("<B", _read_exact(fh, 1, what))
    return _read_exact(fh, n, what).decode("utf-8")


def persist_checkpoint(params: ModelParams, path, meta: CheckpointMeta | None = None) -> None:
    meta = meta or CheckpointMeta()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        _write_string(fh, params.architecture)
        _write_string(fh, params.aggregation)
        fh.write(struct.pack("<I", len(params.layers)))
        for layer in params.layers:
            f_in, f_out = layer.weight.shape
            fh.write(struct.pack("<IIB", f_in, f_out, 1 if layer.frozen else 0))
            fh.write(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        fh.write(struct.pack("<Q", meta.iterations))
        _write_string(fh, meta.loss.kind)
        fh.write(struct.pack("<dd", meta.loss.peak_weight, meta.loss.threshold))
        fh.write(struct.pack("<q", meta.seed))


def load_checkpoint(path) -> tuple[ModelParams, CheckpointMeta]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte offset 0")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "checkpoint version"))
        if version > CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version} at byte offset 4")
        architecture = _read_string(fh, "architecture label")
        aggregation = _read_string(fh, "aggregation mode")
        (n_layers,) = struct.unpack("<I", _read_exact(fh, 4, "layer count"))
        layers = []
        for li in range(n_layers):
            f_in, f_out, frozen = struct.unpack(
                "<IIB", _read_exact(fh, 9, f"layer {li} header")
            )
            w_raw = _read_exact(fh, 8 * f_in * f_out, f"layer {li} weights")
            b_raw = _read_exact(fh, 8 * f_out, f"layer {li} biases")
            weight = np.frombuffer(w_raw, dtype="<f8").reshape(f_in, f_out).copy()
            bias = np.frombuffer(b_raw, dtype="<f8").copy()
            layers.append(Layer(weight=weight, bias=bias, frozen=bool(frozen)))
        (iterations,) = struct.unpack("<Q", _read_exact(fh, 8, "iteration count"))
        loss_kind = _read_string(fh, "loss kind")
        peak_weight, threshold = struct.unpack("<dd", _read_exact(fh, 16, "loss params"))
        (seed,) = struct.unpack("<q", _read_exact(fh, 8, "seed"))
    try:
        params = ModelParams(layers=layers, architecture=architecture, aggregation=aggregation)
    except ValueError as exc:
        raise FormatError(f"checkpoint violates layer invariants: {exc}") from exc
    meta = CheckpointMeta(
        iterations=iterations,
        loss=LossSpec(kind=loss_kind, peak_weight=peak_weight, threshold=threshold),
        seed=seed,
    )
    return params, meta
