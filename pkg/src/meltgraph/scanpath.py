"""Scan-path generation: island orders, raster/spiral/Hilbert fills, multi-laser
partitions, and compilation of plans into per-timestep laser schedules.

Grid nodes are indexed row-major: ``index = iy * nx + ix`` with node (ix, iy)
at physical position (ix * spacing, iy * spacing). Islands are numbered
1..n row-major from the bottom-left island.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

from .material import ProcessParams

CORNERS = ("ll", "lr", "ul", "ur")
ORIENTATIONS = ("lateral", "longitudinal")


@dataclass(frozen=True)
class GridSpec:
    """Uniform square-cell node grid over a square domain."""

    side_length: float  # mm
    node_spacing: float  # mm
    node_counts: tuple[int, int]  # (nx, ny)

    def __post_init__(self) -> None:
        cells = self.side_length / self.node_spacing
        if abs(cells - round(cells)) > 1e-9 * max(1.0, abs(cells)):
            raise ValueError(
                f"side_length {self.side_length} is not an integer multiple of "
                f"node_spacing {self.node_spacing}"
            )
        nx, ny = self.node_counts
        if nx < 2 or ny < 2:
            raise ValueError(f"node counts must be >= 2, got {self.node_counts}")

    @classmethod
    def square(cls, side_length: float, node_spacing: float) -> "GridSpec":
        cells = side_length / node_spacing
        n = int(round(cells))
        if abs(cells - n) > 1e-9 * max(1.0, abs(cells)):
            raise ValueError(
                f"side_length {side_length} is not an integer multiple of "
                f"node_spacing {node_spacing}"
            )
        return cls(side_length=side_length, node_spacing=node_spacing, node_counts=(n + 1, n + 1))

    @property
    def n_nodes(self) -> int:
        return self.node_counts[0] * self.node_counts[1]

    def node_index(self, ix: int, iy: int) -> int:
        nx, ny = self.node_counts
        if not (0 <= ix < nx and 0 <= iy < ny):
            raise ValueError(f"node ({ix}, {iy}) outside grid {self.node_counts}")
        return iy * nx + ix

    def node_ij(self, index: int) -> tuple[int, int]:
        nx, _ = self.node_counts
        return index % nx, index // nx


@dataclass(frozen=True)
class Region:
    """Inclusive node-index rectangle [ix0..ix1] x [iy0..iy1]."""

    ix0: int
    iy0: int
    ix1: int
    iy1: int

    def __post_init__(self) -> None:
        if self.ix1 < self.ix0 or self.iy1 < self.iy0:
            raise ValueError(f"empty region {self}")

    @property
    def width(self) -> int:
        return self.ix1 - self.ix0 + 1

    @property
    def height(self) -> int:
        return self.iy1 - self.iy0 + 1

    def check_within(self, grid: GridSpec) -> None:
        nx, ny = grid.node_counts
        if self.ix0 < 0 or self.iy0 < 0 or self.ix1 >= nx or self.iy1 >= ny:
            raise ValueError(f"region {self} outside grid {grid.node_counts}")


@dataclass(frozen=True)
class ScanPlan:
    """Per-laser ordered node-index paths over one grid."""

    paths: tuple[tuple[int, ...], ...]
    grid: GridSpec
    label: str = ""

    def __post_init__(self) -> None:
        n = self.grid.n_nodes
        for li, path in enumerate(self.paths):
            for node in path:
                if not 0 <= node < n:
                    raise ValueError(f"laser {li}: node index {node} out of range (N={n})")

    @property
    def laser_count(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class LaserSchedule:
    """Per-timestep (laser id, focal node) entries; lasers advance in lockstep.

    A laser that has finished its path contributes no entry at later
    timesteps. ``dwell`` is the hop time node_spacing / scan_speed.
    """

    steps: tuple[tuple[tuple[int, int], ...], ...]
    dwell: float
    grid: GridSpec

    @property
    def n_timesteps(self) -> int:
        return len(self.steps)


def full_coverage_nodes(plan: ScanPlan) -> bool:
    """True when the union of all paths visits every grid node exactly once."""
    seen: set[int] = set()
    total = 0
    for path in plan.paths:
        seen.update(path)
        total += len(path)
    return total == plan.grid.n_nodes and len(seen) == total


def islands_per_side(grid: GridSpec, island_size: float) -> int:
    m = grid.side_length / island_size
    if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
        raise ValueError(
            f"island size {island_size} does not divide side length {grid.side_length}"
        )
    return int(round(m))


def island_region(grid: GridSpec, island_size: float, island: int) -> Region:
    """Node band owned by 1-based island index (row-major from bottom-left).

    Interior island boundaries are owned by the island on the +side so the
    bands partition the node set; the last row/column band absorbs the final
    grid line.
    """
    m = islands_per_side(grid, island_size)
    if not 1 <= island <= m * m:
        raise ValueError(f"island index {island} outside 1..{m * m}")
    cpi = int(round(island_size / grid.node_spacing))  # cells per island
    nx, ny = grid.node_counts
    r, c = divmod(island - 1, m)
    ix0 = c * cpi
    ix1 = (c + 1) * cpi - 1 if c < m - 1 else nx - 1
    iy0 = r * cpi
    iy1 = (r + 1) * cpi - 1 if r < m - 1 else ny - 1
    return Region(ix0, iy0, ix1, iy1)


def enumerate_island_sequences(
    grid: GridSpec, island_size: float, limit: int, seed: int
) -> list[tuple[int, ...]]:
    """All n! island orders when n! <= limit, else `limit` distinct seeded samples."""
    m = islands_per_side(grid, island_size)
    n = m * m
    total = math.factorial(n)
    base = list(range(1, n + 1))
    if total <= limit:
        return [tuple(p) for p in itertools.permutations(base)]
    rng = random.Random(seed)
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    while len(out) < limit:
        perm = base[:]
        rng.shuffle(perm)  # Fisher-Yates
        t = tuple(perm)
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def _corner_of(region: Region, corner: str) -> tuple[int, int]:
    if corner == "ll":
        return region.ix0, region.iy0
    if corner == "lr":
        return region.ix1, region.iy0
    if corner == "ul":
        return region.ix0, region.iy1
    if corner == "ur":
        return region.ix1, region.iy1
    raise ValueError(f"unknown corner {corner!r}; expected one of {CORNERS}")


def raster_path(
    grid: GridSpec, region: Region, orientation: str, start_corner: str = "ll"
) -> list[int]:
    """Serpentine fill of the region: rows (lateral) or columns (longitudinal)
    alternate direction, starting at ``start_corner``."""
    region.check_within(grid)
    if orientation not in ORIENTATIONS:
        raise ValueError(f"unknown orientation {orientation!r}; expected one of {ORIENTATIONS}")
    cx, cy = _corner_of(region, start_corner)
    xs = list(range(region.ix0, region.ix1 + 1))
    ys = list(range(region.iy0, region.iy1 + 1))
    if cx == region.ix1:
        xs.reverse()
    if cy == region.iy1:
        ys.reverse()
    path: list[int] = []
    if orientation == "lateral":
        for j, iy in enumerate(ys):
            row = xs if j % 2 == 0 else xs[::-1]
            path.extend(grid.node_index(ix, iy) for ix in row)
    else:
        for j, ix in enumerate(xs):
            col = ys if j % 2 == 0 else ys[::-1]
            path.extend(grid.node_index(ix, iy) for iy in col)
    return path


def spiral_path(grid: GridSpec, region: Region, inward: bool = True) -> list[int]:
    """Rectangular spiral covering the region; consecutive nodes 4-adjacent."""
    region.check_within(grid)
    x0, y0, x1, y1 = region.ix0, region.iy0, region.ix1, region.iy1
    path: list[int] = []
    while x0 <= x1 and y0 <= y1:
        for ix in range(x0, x1 + 1):
            path.append(grid.node_index(ix, y1))
        for iy in range(y1 - 1, y0 - 1, -1):
            path.append(grid.node_index(x1, iy))
        if y0 < y1:
            for ix in range(x1 - 1, x0 - 1, -1):
                path.append(grid.node_index(ix, y0))
        if x0 < x1:
            for iy in range(y0 + 1, y1):
                path.append(grid.node_index(x0, iy))
        x0 += 1
        x1 -= 1
        y0 += 1
        y1 -= 1
    if not inward:
        path.reverse()
    return path


def _hilbert_d2xy(order_n: int, d: int) -> tuple[int, int]:
    # Classic Hilbert index-to-coordinate conversion on an order_n x order_n grid.
    x = y = 0
    t = d
    s = 1
    while s < order_n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


def hilbert_path(grid: GridSpec, region: Region) -> list[int]:
    """Hilbert curve over a 2^k x 2^k square region."""
    region.check_within(grid)
    side = region.width
    if region.height != side:
        raise ValueError(f"Hilbert region must be square, got {region.width}x{region.height}")
    if side < 1 or side & (side - 1) != 0:
        raise ValueError(f"Hilbert region side must be a power of two, got {side}")
    path = []
    for d in range(side * side):
        x, y = _hilbert_d2xy(side, d)
        path.append(grid.node_index(region.ix0 + x, region.iy0 + y))
    return path


def partition_columns(grid: GridSpec, n_regions: int) -> list[Region]:
    """Split the grid into n vertical bands with widths as equal as node
    counts allow; boundaries snap to grid columns."""
    nx, ny = grid.node_counts
    if not 1 <= n_regions <= nx:
        raise ValueError(f"cannot split {nx} columns into {n_regions} regions")
    base, extra = divmod(nx, n_regions)
    regions = []
    start = 0
    for r in range(n_regions):
        width = base + (1 if r < extra else 0)
        regions.append(Region(start, 0, start + width - 1, ny - 1))
        start += width
    return regions


def island_plan(
    grid: GridSpec, island_size: float, sequence: tuple[int, ...] | list[int], label: str = ""
) -> ScanPlan:
    """Single-laser full-coverage plan printing islands in the given order.

    Each island is filled with a lateral serpentine raster starting at its
    lower-left corner.
    """
    m = islands_per_side(grid, island_size)
    if sorted(sequence) != list(range(1, m * m + 1)):
        raise ValueError(f"sequence must be a permutation of 1..{m * m}, got {sequence}")
    path: list[int] = []
    for island in sequence:
        region = island_region(grid, island_size, island)
        path.extend(raster_path(grid, region, "lateral", "ll"))
    if not label:
        label = "islands-" + "-".join(str(i) for i in sequence)
    return ScanPlan(paths=(tuple(path),), grid=grid, label=label)


def multi_laser_raster_plan(
    grid: GridSpec,
    choices: list[tuple[str, str]],
    label: str = "",
) -> ScanPlan:
    """One raster plan for n lasers on n vertical bands.

    ``choices[i]`` is (start_corner, orientation) for laser i.
    """
    regions = partition_columns(grid, len(choices))
    paths = []
    for region, (corner, orientation) in zip(regions, choices):
        paths.append(tuple(raster_path(grid, region, orientation, corner)))
    return ScanPlan(paths=tuple(paths), grid=grid, label=label)


def multi_laser_doe(grid: GridSpec, n_lasers: int = 3) -> list[ScanPlan]:
    """Full-factorial DOE over per-laser (start corner, orientation) choices.

    4 corners x 2 orientations per laser; 8**n_lasers plans (512 for three).
    """
    options = [(c, o) for c in CORNERS for o in ORIENTATIONS]
    plans = []
    for combo in itertools.product(options, repeat=n_lasers):
        label = "doe-" + "-".join(f"{c}.{o[:3]}" for c, o in combo)
        plans.append(multi_laser_raster_plan(grid, list(combo), label))
    return plans


def spiral_plan(grid: GridSpec, n_lasers: int = 1, inward: bool = True, label: str = "spiral") -> ScanPlan:
    """Spiral fill per vertical band, one band per laser."""
    regions = partition_columns(grid, n_lasers)
    paths = tuple(tuple(spiral_path(grid, r, inward)) for r in regions)
    return ScanPlan(paths=paths, grid=grid, label=label)


def hilbert_plan(grid: GridSpec, label: str = "hilbert") -> ScanPlan:
    """Single-laser Hilbert plan over the whole (power-of-two) grid."""
    nx, ny = grid.node_counts
    path = hilbert_path(grid, Region(0, 0, nx - 1, ny - 1))
    return ScanPlan(paths=(tuple(path),), grid=grid, label=label)


def compile_schedule(plan: ScanPlan, params: ProcessParams) -> LaserSchedule:
    """Timestep t maps laser i to the t-th node of its path; lockstep start."""
    n_steps = max((len(p) for p in plan.paths), default=0)
    steps = []
    for t in range(n_steps):
        entries = tuple(
            (laser, path[t]) for laser, path in enumerate(plan.paths) if t < len(path)
        )
        steps.append(entries)
    dwell = plan.grid.node_spacing / params.scan_speed
    return LaserSchedule(steps=tuple(steps), dwell=dwell, grid=plan.grid)


def plan_to_text(plan: ScanPlan) -> str:
    """Line-oriented serialization; floats use repr for exact round trips."""
    nx, ny = plan.grid.node_counts
    lines = [
        "meltgraph-plan v1",
        f"grid {plan.grid.side_length!r} {plan.grid.node_spacing!r} {nx} {ny}",
        f"lasers {plan.laser_count}",
        f"label {plan.label}",
    ]
    for path in plan.paths:
        lines.append(",".join(str(n) for n in path))
    return "\n".join(lines) + "\n"


def plan_from_text(text: str) -> ScanPlan:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "meltgraph-plan v1":
        raise ValueError("not a meltgraph plan file (bad signature line)")
    grid_parts = lines[1].split()
    if grid_parts[0] != "grid" or len(grid_parts) != 5:
        raise ValueError(f"bad grid line: {lines[1]!r}")
    grid = GridSpec(
        side_length=float(grid_parts[1]),
        node_spacing=float(grid_parts[2]),
        node_counts=(int(grid_parts[3]), int(grid_parts[4])),
    )
    laser_parts = lines[2].split()
    if laser_parts[0] != "lasers":
        raise ValueError(f"bad lasers line: {lines[2]!r}")
    n_lasers = int(laser_parts[1])
    if not lines[3].startswith("label"):
        raise ValueError(f"bad label line: {lines[3]!r}")
    label = lines[3][len("label") :].strip()
    paths = []
    for i in range(n_lasers):
        row = lines[4 + i].strip()
        paths.append(tuple(int(tok) for tok in row.split(",")) if row else ())
    return ScanPlan(paths=tuple(paths), grid=grid, label=label)
