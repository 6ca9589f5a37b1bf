"""Grid-to-graph conversion, normalized propagation matrices, and per-timestep
node feature assembly for the single-laser and multi-laser input layouts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .scanpath import GridSpec
from .thermal import ThermalHistory

AGGREGATION_MODES = ("symmetric", "mean")

# Fixed feature column order: x, y, z, node_type, T_prev, then laser columns.
BASE_FEATURES = 5


@dataclass(frozen=True)
class MeshGraph:
    """Undirected 4-neighbor graph over the grid nodes.

    node_type is 0 on the grid perimeter and 1 inside; coordinates are the
    physical node positions in mm (z constantly 0 for a single layer).
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    coords: np.ndarray  # (N, 3) float64
    node_type: np.ndarray  # (N,) float64 of {0.0, 1.0}


@dataclass(frozen=True)
class PropagationMatrix:
    """Normalized adjacency with self-loops, shared across samples.

    ``matrix`` is normally sparse CSR; a dense ndarray also works (useful for
    small hand-built graphs in oracles).
    """

    matrix: sp.csr_matrix
    mode: str

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def transpose(self):
        cached = getattr(self, "_transpose_cache", None)
        if cached is None:
            cached = self.matrix.T
            if sp.issparse(cached):
                cached = cached.tocsr()
            object.__setattr__(self, "_transpose_cache", cached)
        return cached


@dataclass(frozen=True)
class FeatureVariant:
    """Laser-column layout: SL appends one unit column, ML appends
    ``dup_count`` copies carrying ``amplification`` at focal nodes."""

    kind: str  # "SL" | "ML"
    dup_count: int = 1
    amplification: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("SL", "ML"):
            raise ValueError(f"unknown variant kind {self.kind!r}")
        if self.dup_count < 1:
            raise ValueError("dup_count must be >= 1")

    @classmethod
    def single_laser(cls) -> "FeatureVariant":
        return cls(kind="SL", dup_count=1, amplification=1.0)

    @classmethod
    def multi_laser(cls, a: int, b: float) -> "FeatureVariant":
        return cls(kind="ML", dup_count=int(a), amplification=float(b))

    @property
    def feature_width(self) -> int:
        return BASE_FEATURES + self.dup_count


@dataclass(frozen=True)
class GraphSample:
    """One training datum: feature matrix, propagation ref, target frame."""

    propagation: PropagationMatrix
    features: np.ndarray  # (N, F) float64
    target: np.ndarray  # (N,) float64
    timestep: int
    case_label: str = ""


def grid_to_graph(grid: GridSpec) -> MeshGraph:
    """Nodes at (ix*s, iy*s, 0), 4-neighbor edges, perimeter typed 0."""
    nx, ny = grid.node_counts
    s = grid.node_spacing
    ix = np.tile(np.arange(nx), ny)
    iy = np.repeat(np.arange(ny), nx)
    coords = np.column_stack([ix * s, iy * s, np.zeros(nx * ny)])
    boundary = (ix == 0) | (ix == nx - 1) | (iy == 0) | (iy == ny - 1)
    node_type = np.where(boundary, 0.0, 1.0)
    edges: list[tuple[int, int]] = []
    for j in range(ny):
        for i in range(nx):
            n = j * nx + i
            if i + 1 < nx:
                edges.append((n, n + 1))
            if j + 1 < ny:
                edges.append((n, n + nx))
    return MeshGraph(n_nodes=nx * ny, edges=tuple(edges), coords=coords, node_type=node_type)


def propagation_matrix(graph: MeshGraph, mode: str = "mean") -> PropagationMatrix:
    """Self-loop adjacency normalized symmetrically or by row means."""
    if mode not in AGGREGATION_MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}; expected one of {AGGREGATION_MODES}")
    n = graph.n_nodes
    if graph.edges:
        rows = np.array([e[0] for e in graph.edges] + [e[1] for e in graph.edges])
        cols = np.array([e[1] for e in graph.edges] + [e[0] for e in graph.edges])
        data = np.ones(rows.size, dtype=np.float64)
        adj = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
    else:
        adj = sp.coo_matrix((n, n), dtype=np.float64)
    a_hat = (adj + sp.identity(n, dtype=np.float64)).tocsr()
    degree = np.asarray(a_hat.sum(axis=1)).reshape(-1)
    if mode == "symmetric":
        d_inv_sqrt = sp.diags(1.0 / np.sqrt(degree))
        mat = (d_inv_sqrt @ a_hat @ d_inv_sqrt).tocsr()
    else:
        d_inv = sp.diags(1.0 / degree)
        mat = (d_inv @ a_hat).tocsr()
    mat.sort_indices()
    return PropagationMatrix(matrix=mat, mode=mode)


def assemble_features(
    frame: np.ndarray,
    graph: MeshGraph,
    focal_nodes,
    variant: FeatureVariant,
) -> np.ndarray:
    """N x F feature matrix [x, y, z, node_type, T_prev, laser columns]."""
    n = graph.n_nodes
    temps = np.asarray(frame, dtype=np.float64).reshape(-1)
    if temps.size != n:
        raise ValueError(f"frame length {temps.size} does not match graph nodes {n}")
    focal = list(focal_nodes)
    for node in focal:
        if not 0 <= node < n:
            raise ValueError(f"focal node {node} out of range (N={n})")
    features = np.zeros((n, variant.feature_width), dtype=np.float64)
    features[:, 0:3] = graph.coords
    features[:, 3] = graph.node_type
    features[:, 4] = temps
    if focal:
        features[np.asarray(focal, dtype=int)[:, None], BASE_FEATURES:] = variant.amplification
    return features


class CaseSamples:
    """Lazy sequence of GraphSamples assembled on the fly from one history.

    Sample t (0-based) pairs frame t's temperatures and frame t+1's focal
    nodes as inputs with frame t+1's temperatures as target.
    """

    def __init__(
        self,
        history: ThermalHistory,
        graph: MeshGraph,
        propagation: PropagationMatrix,
        variant: FeatureVariant,
        case_label: str = "",
    ):
        if propagation.n_nodes != graph.n_nodes:
            raise ValueError("propagation size does not match graph")
        self.history = history
        self.graph = graph
        self.propagation = propagation
        self.variant = variant
        self.case_label = case_label

    def __len__(self) -> int:
        return max(0, self.history.n_frames - 1)

    def __getitem__(self, idx: int) -> GraphSample:
        if isinstance(idx, slice):
            return [self[i] for i in range(*idx.indices(len(self)))]
        if idx < 0:
            idx += len(self)
        if not 0 <= idx < len(self):
            raise IndexError(idx)
        prev = self.history.frames[idx]
        cur = self.history.frames[idx + 1]
        features = assemble_features(prev.temps, self.graph, cur.focal_nodes, self.variant)
        return GraphSample(
            propagation=self.propagation,
            features=features,
            target=np.asarray(cur.temps, dtype=np.float64),
            timestep=cur.index,
            case_label=self.case_label,
        )


def samples_from_history(
    history: ThermalHistory,
    graph: MeshGraph,
    propagation: PropagationMatrix,
    variant: FeatureVariant,
    case_label: str = "",
) -> CaseSamples:
    return CaseSamples(history, graph, propagation, variant, case_label)


class ConcatSamples:
    """Read-only concatenation of sample sequences (lazy, no copies)."""

    def __init__(self, parts):
        self.parts = list(parts)
        self.lengths = [len(p) for p in self.parts]

    def __len__(self) -> int:
        return sum(self.lengths)

    def __getitem__(self, idx: int) -> GraphSample:
        if idx < 0:
            idx += len(self)
        if not 0 <= idx < len(self):
            raise IndexError(idx)
        for part, length in zip(self.parts, self.lengths):
            if idx < length:
                return part[idx]
            idx -= length
        raise IndexError(idx)
