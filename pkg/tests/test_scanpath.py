import math

import pytest

from meltgraph.material import ProcessParams
from meltgraph.scanpath import (
    GridSpec,
    Region,
    ScanPlan,
    compile_schedule,
    enumerate_island_sequences,
    full_coverage_nodes,
    hilbert_path,
    hilbert_plan,
    island_plan,
    island_region,
    multi_laser_doe,
    partition_columns,
    plan_from_text,
    plan_to_text,
    raster_path,
    spiral_path,
)


def grid_a():
    return GridSpec.square(2.0, 0.05)


def adjacency_ok(grid, path):
    nx, _ = grid.node_counts
    for a, b in zip(path, path[1:]):
        ax, ay = a % nx, a // nx
        bx, by = b % nx, b // nx
        if abs(ax - bx) + abs(ay - by) != 1:
            return False
    return True


class TestGridSpec:
    def test_domain_a_node_counts(self):
        assert grid_a().node_counts == (41, 41)

    def test_non_divisible_spacing_rejected(self):
        with pytest.raises(ValueError, match="integer multiple"):
            GridSpec.square(2.0, 0.03)

    def test_tiny_grid_rejected(self):
        with pytest.raises(ValueError, match=">= 2"):
            GridSpec(side_length=0.05, node_spacing=0.05, node_counts=(1, 1))


class TestIslandSequences:
    def test_domain_a_all_24(self):
        seqs = enumerate_island_sequences(grid_a(), 1.0, limit=100, seed=0)
        assert len(seqs) == 24
        assert len(set(seqs)) == 24
        for seq in seqs:
            assert sorted(seq) == [1, 2, 3, 4]

    def test_domain_b_sampled(self):
        grid = GridSpec.square(3.0, 0.05)
        seqs = enumerate_island_sequences(grid, 1.0, limit=10, seed=3)
        assert len(seqs) == 10
        assert len(set(seqs)) == 10
        assert math.factorial(9) == 362880  # sampling regime, not exhaustive

    def test_single_island(self):
        grid = GridSpec.square(1.0, 0.05)
        assert enumerate_island_sequences(grid, 1.0, limit=5, seed=0) == [(1,)]

    def test_seed_determinism(self):
        grid = GridSpec.square(3.0, 0.05)
        a = enumerate_island_sequences(grid, 1.0, limit=12, seed=11)
        b = enumerate_island_sequences(grid, 1.0, limit=12, seed=11)
        assert a == b

    def test_non_divisible_island_rejected(self):
        with pytest.raises(ValueError, match="does not divide"):
            enumerate_island_sequences(grid_a(), 0.7, limit=10, seed=0)


class TestRaster:
    def test_2x2_lateral_top_left(self):
        grid = GridSpec.square(0.5, 0.05)
        nx, _ = grid.node_counts
        path = raster_path(grid, Region(0, 0, 1, 1), "lateral", "ul")
        assert len(path) == 4
        assert len(set(path)) == 4
        top_row = {grid.node_index(0, 1), grid.node_index(1, 1)}
        assert set(path[:2]) == top_row

    @pytest.mark.parametrize("orientation", ["lateral", "longitudinal"])
    @pytest.mark.parametrize("corner", ["ll", "lr", "ul", "ur"])
    def test_3x3_serpentine_adjacent(self, orientation, corner):
        grid = GridSpec.square(0.5, 0.05)
        path = raster_path(grid, Region(2, 3, 4, 5), orientation, corner)
        assert len(path) == 9
        assert len(set(path)) == 9
        assert adjacency_ok(grid, path)

    def test_single_column_longitudinal(self):
        grid = GridSpec.square(0.5, 0.05)
        path = raster_path(grid, Region(4, 0, 4, 4), "longitudinal", "ll")
        assert len(path) == 5
        assert adjacency_ok(grid, path)

    def test_start_corner_respected(self):
        grid = GridSpec.square(0.5, 0.05)
        path = raster_path(grid, Region(0, 0, 3, 3), "lateral", "lr")
        assert path[0] == grid.node_index(3, 0)


class TestSpiral:
    def test_3x3_inward_ends_center(self):
        grid = GridSpec.square(0.5, 0.05)
        path = spiral_path(grid, Region(0, 0, 2, 2), inward=True)
        assert len(path) == 9
        assert len(set(path)) == 9
        assert adjacency_ok(grid, path)
        assert path[-1] == grid.node_index(1, 1)

    def test_1x1(self):
        grid = GridSpec.square(0.5, 0.05)
        assert spiral_path(grid, Region(3, 3, 3, 3)) == [grid.node_index(3, 3)]

    def test_2x2(self):
        grid = GridSpec.square(0.5, 0.05)
        path = spiral_path(grid, Region(0, 0, 1, 1))
        assert len(path) == 4
        assert len(set(path)) == 4

    @pytest.mark.parametrize("w,h", [(4, 6), (7, 3), (5, 5)])
    def test_rectangles_cover_adjacent(self, w, h):
        grid = GridSpec.square(0.5, 0.05)
        region = Region(0, 0, w - 1, h - 1)
        path = spiral_path(grid, region)
        assert len(path) == w * h
        assert len(set(path)) == w * h
        assert adjacency_ok(grid, path)

    def test_outward_is_reverse(self):
        grid = GridSpec.square(0.5, 0.05)
        region = Region(0, 0, 3, 3)
        assert spiral_path(grid, region, inward=False) == spiral_path(grid, region)[::-1]


class TestHilbert:
    def test_order1(self):
        grid = GridSpec.square(0.5, 0.05)
        path = hilbert_path(grid, Region(0, 0, 1, 1))
        assert len(path) == 4
        assert len(set(path)) == 4
        assert adjacency_ok(grid, path)

    def test_order2(self):
        grid = GridSpec.square(0.5, 0.05)
        path = hilbert_path(grid, Region(2, 2, 5, 5))
        assert len(path) == 16
        assert len(set(path)) == 16
        assert adjacency_ok(grid, path)

    def test_non_power_of_two_rejected(self):
        grid = GridSpec.square(0.5, 0.05)
        with pytest.raises(ValueError, match="power of two"):
            hilbert_path(grid, Region(0, 0, 2, 2))

    def test_full_grid_plan(self):
        grid = GridSpec.square(1.55, 0.05)  # 32x32 nodes
        plan = hilbert_plan(grid)
        assert full_coverage_nodes(plan)
        assert adjacency_ok(grid, plan.paths[0])


class TestPartitionAndDoe:
    def test_three_band_partition_domain_a(self):
        regions = partition_columns(grid_a(), 3)
        widths = [r.width for r in regions]
        assert sum(widths) == 41
        assert max(widths) - min(widths) <= 1
        # disjoint and ordered
        assert regions[0].ix1 + 1 == regions[1].ix0
        assert regions[1].ix1 + 1 == regions[2].ix0

    def test_doe_count_is_512(self):
        plans = multi_laser_doe(grid_a(), 3)
        assert len(plans) == 512
        assert len({p.label for p in plans}) == 512

    def test_doe_plans_cover_grid(self):
        for plan in multi_laser_doe(grid_a(), 3)[:: 64]:
            assert full_coverage_nodes(plan)


class TestIslandPlan:
    def test_full_coverage_every_sequence(self):
        grid = grid_a()
        for seq in enumerate_island_sequences(grid, 1.0, 100, 0)[:6]:
            assert full_coverage_nodes(island_plan(grid, 1.0, seq))

    def test_island_bands_partition_nodes(self):
        grid = GridSpec.square(3.0, 0.05)
        seen = set()
        total = 0
        for k in range(1, 10):
            region = island_region(grid, 1.0, k)
            nodes = {
                grid.node_index(ix, iy)
                for ix in range(region.ix0, region.ix1 + 1)
                for iy in range(region.iy0, region.iy1 + 1)
            }
            total += len(nodes)
            seen |= nodes
        assert total == grid.n_nodes
        assert len(seen) == grid.n_nodes


class TestSchedule:
    def test_dwell_and_timesteps(self):
        grid = grid_a()
        plan = island_plan(grid, 1.0, (1, 2, 3, 4))
        schedule = compile_schedule(plan, ProcessParams())
        assert schedule.n_timesteps == 1681
        assert schedule.dwell == pytest.approx(0.05 / 1200.0, rel=1e-12)

    def test_equal_length_lasers(self):
        grid = GridSpec.square(0.5, 0.05)
        path = tuple(range(11))
        plan = ScanPlan(paths=(path, path, path), grid=grid)
        schedule = compile_schedule(plan, ProcessParams())
        assert schedule.n_timesteps == 11
        assert all(len(step) == 3 for step in schedule.steps)

    def test_finished_lasers_drop_out(self):
        grid = grid_a()
        plan = ScanPlan(
            paths=(tuple(range(500)), tuple(range(400)), tuple(range(300))),
            grid=grid,
        )
        schedule = compile_schedule(plan, ProcessParams())
        assert schedule.n_timesteps == 500
        assert len(schedule.steps[450]) == 1
        assert len(schedule.steps[350]) == 2
        assert len(schedule.steps[299]) == 3


class TestPlanSerialization:
    def test_round_trip_exact(self):
        plan = island_plan(grid_a(), 1.0, (3, 1, 4, 2), label="case-x")
        text = plan_to_text(plan)
        back = plan_from_text(text)
        assert back == plan
        assert plan_to_text(back) == text

    def test_multi_laser_round_trip(self):
        plan = multi_laser_doe(grid_a(), 3)[17]
        assert plan_from_text(plan_to_text(plan)) == plan

    def test_bad_signature_rejected(self):
        with pytest.raises(ValueError, match="signature"):
            plan_from_text("nonsense\n")

    def test_out_of_range_node_rejected(self):
        grid = GridSpec.square(0.5, 0.05)
        with pytest.raises(ValueError, match="out of range"):
            ScanPlan(paths=((0, 99999),), grid=grid)
