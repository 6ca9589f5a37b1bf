"""Explicit finite-difference transient thermal solver for a thin plate under
moving volumetric Gaussian-ellipsoid heat sources.

The plate is depth-lumped: through-thickness gradients are dropped and the
3D source is averaged over the plate thickness analytically. Conduction uses
a 5-point stencil with harmonic-mean face conductivities and zero-flux
mirrored boundaries; top/bottom faces lose heat through the effective and
substrate coefficients, exposed lateral faces through the effective
coefficient.

Source offsets are computed from integer node deltas so that a mirrored plan
produces the bitwise-mirrored field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .material import MaterialTable, ProcessParams, property_arrays
from .scanpath import GridSpec, LaserSchedule, ScanPlan, compile_schedule

STABILITY_SENTINEL = 1e12  # returned when no transport term limits dt

# Substeps per laser dwell. Stability alone allows 1, but the swept source
# needs a few samples per hop for sub-0.5% dt-refinement error.
DEFAULT_MIN_SUBSTEPS = 4


class ThermalBlowupError(RuntimeError):
    """A step produced a non-finite temperature."""


@dataclass(frozen=True)
class GoldakParams:
    """Ellipsoid Gaussian source: width a (transverse), depth b, length c."""

    a_width: float  # mm
    b_depth: float  # mm
    c_length: float  # mm
    power: float  # W
    efficiency: float

    def __post_init__(self) -> None:
        for name in ("a_width", "b_depth", "c_length", "power"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency}")

    @classmethod
    def from_process(cls, params: ProcessParams) -> "GoldakParams":
        # Ellipsoid width/length default to the laser radius, depth to the
        # plate thickness.
        return cls(
            a_width=params.laser_radius,
            b_depth=params.plate_thickness,
            c_length=params.laser_radius,
            power=params.power,
            efficiency=params.absorptivity,
        )


@dataclass(frozen=True)
class ActiveSource:
    """A source focused on a grid node, optionally swept along a unit hop.

    ``hop`` is the integer grid direction of travel ((+-1,0) or (0,+-1));
    ``pullback`` places the instantaneous center that many mm behind the
    focal node along the hop. A (0, 0) hop is a stationary source.
    """

    goldak: GoldakParams
    node: int
    hop: tuple[int, int] = (0, 0)
    pullback: float = 0.0


@dataclass
class ThermalState:
    """Node temperatures (degC, float64) at a simulation time."""

    grid: GridSpec
    temps: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class Frame:
    index: int
    temps: np.ndarray  # float32, length nx*ny
    focal_nodes: tuple[int, ...]


@dataclass
class ThermalHistory:
    """Per-timestep temperature frames; frame 0 is the initial condition."""

    grid: GridSpec
    frames: list[Frame]
    dwell: float

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def temps_matrix(self) -> np.ndarray:
        """(n_frames, N) float32 view of all frames."""
        return np.stack([f.temps for f in self.frames])


def goldak_power(params: GoldakParams, dx: float, dy_depth: float, dz_along: float):
    """Volumetric power density W/mm^3 of the ellipsoid Gaussian source."""
    a, b, c = params.a_width, params.b_depth, params.c_length
    prefactor = (6.0 * math.sqrt(3.0) * params.power * params.efficiency) / (
        a * b * c * math.pi ** 1.5
    )
    return prefactor * np.exp(
        -3.0 * (np.asarray(dx) ** 2) / a**2
        - 3.0 * (np.asarray(dy_depth) ** 2) / b**2
        - 3.0 * (np.asarray(dz_along) ** 2) / c**2
    )


def depth_averaged_peak(params: GoldakParams, plate_thickness: float) -> float:
    """Peak of the source averaged over y in [0, thickness]."""
    a, b, c = params.a_width, params.b_depth, params.c_length
    prefactor = (6.0 * math.sqrt(3.0) * params.power * params.efficiency) / (
        a * b * c * math.pi ** 1.5
    )
    depth_factor = (
        b * math.sqrt(math.pi) / (2.0 * math.sqrt(3.0) * plate_thickness)
    ) * math.erf(math.sqrt(3.0) * plate_thickness / b)
    return prefactor * depth_factor


def source_field(
    sources,
    grid: GridSpec,
    plate_thickness: float,
) -> np.ndarray:
    """Depth-averaged volumetric power density (ny, nx) for active sources.

    Sources may be ActiveSource instances or bare (GoldakParams, node) pairs.
    Offsets use integer node deltas times the spacing so mirrored inputs give
    bitwise-mirrored fields; contributions beyond 4 ellipsoid radii are cut.
    """
    nx, ny = grid.node_counts
    s = grid.node_spacing
    field = np.zeros((ny, nx), dtype=np.float64)
    for src in sources:
        if not isinstance(src, ActiveSource):
            goldak, node = src
            src = ActiveSource(goldak=goldak, node=node)
        g = src.goldak
        peak = depth_averaged_peak(g, plate_thickness)
        cx, cy = grid.node_ij(src.node)
        hx, hy = src.hop
        half = int(math.ceil(4.0 * max(g.a_width, g.c_length) / s)) + 1
        x_lo, x_hi = max(0, cx - half), min(nx - 1, cx + half)
        y_lo, y_hi = max(0, cy - half), min(ny - 1, cy + half)
        dix = np.arange(x_lo - cx, x_hi - cx + 1, dtype=np.float64)
        diy = np.arange(y_lo - cy, y_hi - cy + 1, dtype=np.float64)
        # Position delta from the instantaneous center to each node.
        delta_x = dix * s + src.pullback * hx
        delta_y = diy * s + src.pullback * hy
        if hy == 0 and hx != 0:
            along_sq = (delta_x**2)[None, :] + np.zeros((diy.size, 1))
            trans_sq = (delta_y**2)[:, None] + np.zeros((1, dix.size))
        elif hx == 0 and hy != 0:
            along_sq = (delta_y**2)[:, None] + np.zeros((1, dix.size))
            trans_sq = (delta_x**2)[None, :] + np.zeros((diy.size, 1))
        else:
            # Stationary source: x transverse, y along (a = c by default).
            trans_sq = (delta_x**2)[None, :] + np.zeros((diy.size, 1))
            along_sq = (delta_y**2)[:, None] + np.zeros((1, dix.size))
        patch = peak * np.exp(
            -3.0 * trans_sq / g.a_width**2 - 3.0 * along_sq / g.c_length**2
        )
        field[y_lo : y_hi + 1, x_lo : x_hi + 1] += patch
    return field


def stability_limit(
    grid: GridSpec, material: MaterialTable, params: ProcessParams, t_ref: float
) -> float:
    """Largest stable explicit dt at the reference temperature.

    dt_max = rho * C_p / (4 k / s^2 + (h + h_sub) / thickness); callers apply
    a 0.5 safety factor.
    """
    k_xs, k_ys = property_arrays(material, "conductivity")
    c_xs, c_ys = property_arrays(material, "specific_heat")
    k = float(np.interp(t_ref, k_xs, k_ys))
    cp = float(np.interp(t_ref, c_xs, c_ys))
    s = grid.node_spacing
    denom = 4.0 * k / s**2 + (params.effective_htc + params.substrate_htc) / params.plate_thickness
    if denom <= 0.0:
        return STABILITY_SENTINEL
    return min(material.density * cp / denom, STABILITY_SENTINEL)


def conservative_stability_limit(
    grid: GridSpec, material: MaterialTable, params: ProcessParams
) -> float:
    """Minimum stability limit over every table abscissa."""
    temps = {t for t, _ in material.conductivity_points}
    temps |= {t for t, _ in material.specific_heat_points}
    return min(stability_limit(grid, material, params, t) for t in temps)


class _SolverCore:
    """Precomputed arrays for repeated substeps on one grid/material/params."""

    def __init__(self, grid: GridSpec, material: MaterialTable, params: ProcessParams):
        self.grid = grid
        self.material = material
        self.params = params
        self.k_xs, self.k_ys = property_arrays(material, "conductivity")
        self.c_xs, self.c_ys = property_arrays(material, "specific_heat")
        nx, ny = grid.node_counts
        # Exposed lateral face count per node: 2 at corners, 1 on edges.
        faces = np.zeros((ny, nx), dtype=np.float64)
        faces[0, :] += 1.0
        faces[-1, :] += 1.0
        faces[:, 0] += 1.0
        faces[:, -1] += 1.0
        self.edge_faces = faces

    def rate(self, T: np.ndarray, src: np.ndarray) -> np.ndarray:
        """Volumetric power balance W/mm^3 per node given (ny, nx) arrays."""
        p = self.params
        s = self.grid.node_spacing
        k = np.interp(T, self.k_xs, self.k_ys)

        kx = 2.0 * k[:, 1:] * k[:, :-1] / (k[:, 1:] + k[:, :-1])
        ky = 2.0 * k[1:, :] * k[:-1, :] / (k[1:, :] + k[:-1, :])
        fe = np.zeros_like(T)
        fw = np.zeros_like(T)
        fn = np.zeros_like(T)
        fs = np.zeros_like(T)
        fe[:, :-1] = kx * (T[:, 1:] - T[:, :-1])
        fw[:, 1:] = kx * (T[:, :-1] - T[:, 1:])
        fn[:-1, :] = ky * (T[1:, :] - T[:-1, :])
        fs[1:, :] = ky * (T[:-1, :] - T[1:, :])
        # East+west grouped before north+south keeps mirrored sums bitwise equal.
        cond = ((fe + fw) + (fn + fs)) / s**2

        loss = (p.effective_htc / p.plate_thickness) * (T - p.ambient_temperature)
        loss = loss + (p.substrate_htc / p.plate_thickness) * (T - p.substrate_temperature)
        loss = loss + (p.effective_htc / s) * self.edge_faces * (T - p.ambient_temperature)
        return (cond + src) - loss

    def substep(self, T: np.ndarray, src: np.ndarray, dt: float) -> np.ndarray:
        cp = np.interp(T, self.c_xs, self.c_ys)
        return T + (dt / (self.material.density * cp)) * self.rate(T, src)


def _first_nonfinite(temps: np.ndarray) -> int:
    return int(np.flatnonzero(~np.isfinite(temps))[0])


def step(
    state: ThermalState,
    active_sources,
    dt: float,
    material: MaterialTable,
    params: ProcessParams,
) -> ThermalState:
    """One forward-Euler update of the depth-lumped heat equation.

    ``active_sources`` accepts (GoldakParams, focal node) pairs or
    ActiveSource instances. Raises ThermalBlowupError on non-finite output.
    """
    grid = state.grid
    nx, ny = grid.node_counts
    core = _SolverCore(grid, material, params)
    src = source_field(active_sources, grid, params.plate_thickness)
    T = state.temps.reshape(ny, nx)
    T_new = core.substep(T, src, dt).reshape(-1)
    if not np.all(np.isfinite(T_new)):
        node = _first_nonfinite(T_new)
        raise ThermalBlowupError(
            f"non-finite temperature at node {node} after step to t={state.time + dt:.6g} s"
        )
    return ThermalState(grid=grid, temps=T_new, time=state.time + dt)


def _hop_direction(grid: GridSpec, prev_node: int | None, node: int) -> tuple[int, int]:
    """Unit travel direction for an adjacent hop, else (0, 0)."""
    if prev_node is None:
        return (0, 0)
    px, py = grid.node_ij(prev_node)
    cx, cy = grid.node_ij(node)
    dx, dy = cx - px, cy - py
    if abs(dx) + abs(dy) == 1:
        return (dx, dy)
    return (0, 0)  # island/region jump: laser-off travel is instantaneous


def simulate(
    plan: ScanPlan,
    material: MaterialTable,
    params: ProcessParams,
    initial_temperature: float | None = None,
    goldak: GoldakParams | None = None,
    schedule: LaserSchedule | None = None,
    min_substeps: int = DEFAULT_MIN_SUBSTEPS,
) -> ThermalHistory:
    """Run the full scan plan, emitting one frame per schedule timestep.

    Frame 0 is the uniform initial condition (substrate temperature unless
    overridden). Each dwell is integrated with enough substeps to stay below
    half the conservative stability limit; within a dwell the source sweeps
    from the previous node to the focal node.
    """
    if initial_temperature is None:
        initial_temperature = params.substrate_temperature
    if goldak is None:
        goldak = GoldakParams.from_process(params)
    if schedule is None:
        schedule = compile_schedule(plan, params)

    grid = plan.grid
    nx, ny = grid.node_counts
    core = _SolverCore(grid, material, params)

    dwell = schedule.dwell
    dt_stable = conservative_stability_limit(grid, material, params)
    n_sub = max(min_substeps, int(math.ceil(2.0 * dwell / dt_stable)))
    dt_sub = dwell / n_sub

    T = np.full((ny, nx), float(initial_temperature), dtype=np.float64)
    frames = [Frame(index=0, temps=T.reshape(-1).astype(np.float32), focal_nodes=())]

    for t, entries in enumerate(schedule.steps):
        sources = []
        for laser, node in entries:
            prev = plan.paths[laser][t - 1] if t >= 1 and t - 1 < len(plan.paths[laser]) else None
            hop = _hop_direction(grid, prev, node)
            sources.append((laser, node, hop))
        for j in range(n_sub):
            tau_mid = (j + 0.5) * dt_sub
            active = []
            for laser, node, hop in sources:
                if hop == (0, 0):
                    pullback = 0.0
                else:
                    pullback = grid.node_spacing - params.scan_speed * tau_mid
                active.append(ActiveSource(goldak=goldak, node=node, hop=hop, pullback=pullback))
            src = source_field(active, grid, params.plate_thickness)
            T = core.substep(T, src, dt_sub)
        flat = T.reshape(-1)
        if not np.all(np.isfinite(flat)):
            node = _first_nonfinite(flat)
            raise ThermalBlowupError(
                f"non-finite temperature at node {node} during timestep {t}"
            )
        focal = tuple(node for _, node in entries)
        frames.append(Frame(index=t + 1, temps=flat.astype(np.float32), focal_nodes=focal))

    return ThermalHistory(grid=grid, frames=frames, dwell=dwell)
