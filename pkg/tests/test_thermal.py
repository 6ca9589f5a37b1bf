import math

import numpy as np
import pytest
from scipy import ndimage

from meltgraph.material import MaterialTable, ProcessParams
from meltgraph.scanpath import (
    GridSpec,
    Region,
    ScanPlan,
    island_plan,
    multi_laser_doe,
    raster_path,
)
from meltgraph.thermal import (
    STABILITY_SENTINEL,
    GoldakParams,
    ThermalBlowupError,
    ThermalState,
    conservative_stability_limit,
    depth_averaged_peak,
    goldak_power,
    simulate,
    source_field,
    stability_limit,
    step,
)

CONST_MAT = MaterialTable.constant(conductivity=0.02, specific_heat=0.5, density=8.44e-3)


def small_grid(side=0.5):
    return GridSpec.square(side, 0.05)


class TestGoldak:
    def test_center_value(self):
        gp = GoldakParams(a_width=0.05, b_depth=0.02, c_length=0.05, power=195.0, efficiency=0.4)
        expected = (6.0 * math.sqrt(3.0) * 78.0) / (5e-5 * math.pi**1.5)
        assert goldak_power(gp, 0.0, 0.0, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_one_width_off_axis(self):
        gp = GoldakParams(a_width=0.05, b_depth=0.02, c_length=0.05, power=195.0, efficiency=0.4)
        center = goldak_power(gp, 0.0, 0.0, 0.0)
        assert goldak_power(gp, gp.a_width, 0.0, 0.0) == pytest.approx(
            center * math.exp(-3.0), rel=1e-12
        )

    def test_decays_to_zero(self):
        gp = GoldakParams.from_process(ProcessParams())
        assert goldak_power(gp, 100.0, 0.0, 0.0) == 0.0

    def test_depth_average_below_peak(self):
        gp = GoldakParams.from_process(ProcessParams())
        assert depth_averaged_peak(gp, 0.02) < goldak_power(gp, 0.0, 0.0, 0.0)

    def test_source_field_total_power(self):
        # Node-quadrature of the ellipsoid at s = a aliases by ~15%, so this
        # only guards against gross normalization errors (wrong prefactor,
        # double counting).
        params = ProcessParams()
        gp = GoldakParams.from_process(params)
        grid = small_grid(1.0)
        field = source_field([(gp, grid.node_index(10, 10))], grid, params.plate_thickness)
        cellvol = grid.node_spacing**2 * params.plate_thickness
        total = field.sum() * cellvol
        expected = params.power * params.absorptivity * math.erf(
            math.sqrt(3.0) * params.plate_thickness / gp.b_depth
        )
        assert total == pytest.approx(expected, rel=0.2)

    def test_rejects_bad_efficiency(self):
        with pytest.raises(ValueError, match="efficiency"):
            GoldakParams(a_width=0.05, b_depth=0.02, c_length=0.05, power=195.0, efficiency=0.0)


class TestStability:
    def test_hand_value(self):
        params = ProcessParams(effective_htc=1e-12, substrate_htc=1e-12)
        dt = stability_limit(small_grid(), CONST_MAT, params, t_ref=500.0)
        assert dt == pytest.approx(8.44e-3 * 0.5 / (4.0 * 0.02 / 0.05**2), rel=1e-6)

    def test_monotone_in_spacing(self):
        params = ProcessParams()
        coarse = stability_limit(GridSpec.square(0.5, 0.1), CONST_MAT, params, 500.0)
        fine = stability_limit(GridSpec.square(0.5, 0.05), CONST_MAT, params, 500.0)
        assert coarse > fine

    def test_sentinel_without_transport(self):
        mat = MaterialTable.constant(conductivity=1e-30, specific_heat=0.5, density=8.44e-3)
        params = ProcessParams(effective_htc=0.0, substrate_htc=0.0)
        assert stability_limit(small_grid(), mat, params, 500.0) == STABILITY_SENTINEL


class TestStep:
    def test_equilibrium_is_fixed_point(self):
        grid = small_grid()
        params = ProcessParams(effective_htc=0.0, substrate_htc=0.0)
        state = ThermalState(grid=grid, temps=np.full(grid.n_nodes, 80.0))
        out = step(state, [], 2e-5, CONST_MAT, params)
        assert np.array_equal(out.temps, state.temps)

    def test_insulated_energy_conserved(self):
        grid = small_grid()
        params = ProcessParams(effective_htc=0.0, substrate_htc=0.0)
        rng = np.random.default_rng(0)
        state = ThermalState(grid=grid, temps=80.0 + 500.0 * rng.random(grid.n_nodes))
        cellvol = grid.node_spacing**2 * params.plate_thickness
        for _ in range(20):
            energy_before = float(np.sum(CONST_MAT.density * 0.5 * state.temps)) * cellvol
            state = step(state, [], 2e-5, CONST_MAT, params)
            energy_after = float(np.sum(CONST_MAT.density * 0.5 * state.temps)) * cellvol
            assert abs(energy_after - energy_before) / energy_before < 1e-9

    def test_sourced_energy_balance(self):
        grid = small_grid()
        params = ProcessParams()
        gp = GoldakParams.from_process(params)
        focal = grid.node_index(5, 5)
        state = ThermalState(grid=grid, temps=np.full(grid.n_nodes, 80.0))
        dt = 2e-5
        cellvol = grid.node_spacing**2 * params.plate_thickness
        src = source_field([(gp, focal)], grid, params.plate_thickness)
        edge_faces = np.zeros(grid.node_counts[::-1])
        edge_faces[0, :] += 1
        edge_faces[-1, :] += 1
        edge_faces[:, 0] += 1
        edge_faces[:, -1] += 1
        for _ in range(5):
            temps = state.temps
            deposited = float(src.sum()) * cellvol * dt
            loss = (params.effective_htc / params.plate_thickness) * (
                temps - params.ambient_temperature
            )
            loss += (params.substrate_htc / params.plate_thickness) * (
                temps - params.substrate_temperature
            )
            loss += (
                (params.effective_htc / grid.node_spacing)
                * edge_faces.reshape(-1)
                * (temps - params.ambient_temperature)
            )
            lost = float(loss.sum()) * cellvol * dt
            energy_before = float(np.sum(CONST_MAT.density * 0.5 * temps)) * cellvol
            state = step(state, [(gp, focal)], dt, CONST_MAT, params)
            energy_after = float(np.sum(CONST_MAT.density * 0.5 * state.temps)) * cellvol
            residual = abs((energy_after - energy_before) - (deposited - lost))
            assert residual / abs(deposited - lost) < 1e-6

    def test_hot_spot_near_focal_node(self):
        grid = small_grid()
        params = ProcessParams()
        gp = GoldakParams.from_process(params)
        focal = grid.node_index(5, 5)
        state = ThermalState(grid=grid, temps=np.full(grid.n_nodes, 80.0))
        out = step(state, [(gp, focal)], 2e-5, MaterialTable.in625(), params)
        nx, _ = grid.node_counts
        hottest = int(np.argmax(out.temps))
        assert abs(hottest % nx - focal % nx) <= 1
        assert abs(hottest // nx - focal // nx) <= 1

    def test_maximum_principle_source_free(self):
        grid = small_grid()
        params = ProcessParams(effective_htc=0.0, substrate_htc=0.0)
        rng = np.random.default_rng(7)
        state = ThermalState(grid=grid, temps=80.0 + 900.0 * rng.random(grid.n_nodes))
        lo, hi = state.temps.min(), state.temps.max()
        for _ in range(50):
            state = step(state, [], 2e-5, MaterialTable.in625(), params)
            assert state.temps.min() >= lo - 1e-9
            assert state.temps.max() <= hi + 1e-9

    def test_blowup_reports_node(self):
        grid = small_grid()
        params = ProcessParams()
        gp = GoldakParams.from_process(params)
        state = ThermalState(grid=grid, temps=np.full(grid.n_nodes, 80.0))
        dt = 50.0 * conservative_stability_limit(grid, CONST_MAT, params)
        with pytest.raises(ThermalBlowupError, match="node"):
            for _ in range(400):
                state = step(state, [(gp, 60)], dt, CONST_MAT, params)


class TestSimulate:
    def test_empty_plan_single_frame(self):
        grid = small_grid()
        plan = ScanPlan(paths=(), grid=grid)
        history = simulate(plan, MaterialTable.in625(), ProcessParams())
        assert history.n_frames == 1
        assert np.all(history.frames[0].temps == np.float32(80.0))

    def test_domain_a_island_run(self):
        grid = GridSpec.square(2.0, 0.05)
        plan = island_plan(grid, 1.0, (1, 2, 3, 4))
        history = simulate(plan, MaterialTable.in625(), ProcessParams())
        assert history.n_frames == 1682  # 41*41 hops + initial frame
        temps = history.temps_matrix()
        assert np.all(np.isfinite(temps))
        assert temps.max() > 1000.0  # melt-pool threshold exceeded somewhere

    def test_frame_count_matches_schedule(self):
        grid = small_grid()
        plan = ScanPlan(paths=((0, 1, 2, 3),), grid=grid)
        history = simulate(plan, MaterialTable.in625(), ProcessParams())
        assert history.n_frames == 5
        assert history.frames[2].focal_nodes == (1,)

    def test_three_laser_hot_spots_bounded(self):
        grid = GridSpec.square(1.5, 0.05)
        plan = multi_laser_doe(grid, 3)[0]
        history = simulate(plan, MaterialTable.in625(), ProcessParams())
        nx, ny = grid.node_counts
        for frame in history.frames[1:: 40]:
            hot = frame.temps.reshape(ny, nx) > 1000.0
            _, n_components = ndimage.label(hot)
            assert n_components <= 3

    def test_mirror_symmetry_bitwise(self):
        grid = GridSpec.square(1.0, 0.05)
        nx, ny = grid.node_counts
        path = raster_path(grid, Region(0, 0, nx - 1, ny - 1), "lateral", "ll")
        mirrored = tuple(
            (n // nx) * nx + (nx - 1 - n % nx) for n in path
        )
        fwd = simulate(
            ScanPlan(paths=(tuple(path),), grid=grid), MaterialTable.in625(), ProcessParams()
        )
        mir = simulate(
            ScanPlan(paths=(mirrored,), grid=grid), MaterialTable.in625(), ProcessParams()
        )
        for f1, f2 in zip(fwd.frames, mir.frames):
            a = f1.temps.reshape(ny, nx)
            b = f2.temps.reshape(ny, nx)[:, ::-1]
            assert np.array_equal(a, b)

    def test_time_refinement_consistency(self):
        # halving dt below the operating resolution moves the final frame < 0.5% RMS
        grid = small_grid()
        plan = island_plan(grid, 0.5, (1,))
        coarse = simulate(plan, MaterialTable.in625(), ProcessParams())
        fine = simulate(plan, MaterialTable.in625(), ProcessParams(), min_substeps=8)
        a = coarse.frames[-1].temps.astype(np.float64)
        b = fine.frames[-1].temps.astype(np.float64)
        rms_change = np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(a**2))
        assert rms_change < 0.005

    def test_temperatures_never_undershoot(self):
        grid = small_grid()
        plan = island_plan(grid, 0.5, (1,))
        history = simulate(plan, MaterialTable.in625(), ProcessParams())
        assert history.temps_matrix().min() >= 25.0 - 1e-6
