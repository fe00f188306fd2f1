"""Layout construction and robot mobility rules."""

import json

import numpy as np
import pytest

from subnetrl import factory
from subnetrl.factory import LayoutConfig, LayoutError, SpawnError


def default_layout():
    return factory.build_layout(0, LayoutConfig())


class TestLayout:
    def test_default_alley_area(self):
        layout = default_layout()
        assert 1400.0 <= layout.alley_area() <= 1800.0

    def test_degenerate_open_hall(self):
        layout = factory.build_layout(0, LayoutConfig(obstacle_cols=0, obstacle_rows=0))
        assert layout.zones == ()
        assert layout.intersections == ()
        assert layout.vertical_xs == () and layout.horizontal_ys == ()

    def test_deterministic(self):
        assert factory.build_layout(3, LayoutConfig()) == factory.build_layout(3, LayoutConfig())

    def test_alley_too_wide(self):
        with pytest.raises(LayoutError):
            factory.build_layout(0, LayoutConfig(alley_width_m=100.0))

    def test_grid_does_not_fit(self):
        with pytest.raises(LayoutError):
            factory.build_layout(0, LayoutConfig(obstacle_cols=50, alley_width_m=5.0))

    def test_zones_inside_bounds_and_off_alleys(self):
        layout = default_layout()
        for x0, y0, x1, y1 in layout.zones:
            assert 0 <= x0 < x1 <= layout.width_m
            assert 0 <= y0 < y1 <= layout.height_m
            for cx in layout.vertical_xs:  # alleys do not overlap zones
                assert x1 <= cx - 2.5 + 1e-9 or x0 >= cx + 2.5 - 1e-9

    def test_intersections_at_crossings(self):
        layout = default_layout()
        assert len(layout.intersections) == len(layout.vertical_xs) * len(layout.horizontal_ys)


class TestSpawn:
    def test_default_twenty(self):
        dep = factory.spawn(default_layout(), 20, 1, seed=0)
        pos = dep.ap_positions()
        d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 1.0

    def test_single_robot(self):
        dep = factory.spawn(default_layout(), 1, 1, seed=0)
        assert len(dep.robots) == 1

    @pytest.mark.parametrize("n", [10, 20, 30, 40, 50])
    def test_density_range(self, n):
        dep = factory.spawn(default_layout(), n, 1, seed=n)
        assert len(dep.robots) == n

    def test_devices_within_radius(self):
        dep = factory.spawn(default_layout(), 5, 4, seed=1, coverage_radius_m=1.0)
        for r in dep.robots:
            assert np.all(np.linalg.norm(r.device_offsets, axis=1) <= 1.0 + 1e-12)

    def test_infeasible_packing(self):
        tiny = factory.build_layout(0, LayoutConfig(width_m=12, height_m=12, alley_width_m=5,
                                                    obstacle_cols=2, obstacle_rows=2))
        with pytest.raises(SpawnError):
            factory.spawn(tiny, 200, 1, seed=0)

    def test_deterministic(self):
        a = factory.spawn(default_layout(), 10, 2, seed=5)
        b = factory.spawn(default_layout(), 10, 2, seed=5)
        assert np.array_equal(a.ap_positions(), b.ap_positions())
        assert np.array_equal(a.device_positions(), b.device_positions())


def robots_on_lane_area(dep, layout):
    off = layout.lane_offset
    for r in dep.robots:
        x, y = r.position_xy(layout)
        on_v = any(abs(x - (cx + s * off)) < 1e-6 for cx in layout.vertical_xs for s in (-1, 1))
        on_h = any(abs(y - (cy + s * off)) < 1e-6 for cy in layout.horizontal_ys for s in (-1, 1))
        if not (on_v or on_h):
            return False
        if not (0 <= x <= layout.width_m and 0 <= y <= layout.height_m):
            return False
    return True


class TestMobility:
    def test_displacement_per_step(self):
        layout = default_layout()
        dep = factory.spawn(layout, 1, 1, seed=3)
        p0 = dep.ap_positions()[0]
        factory.step_mobility(dep, layout, dt_s=0.005)
        p1 = dep.ap_positions()[0]
        assert np.linalg.norm(p1 - p0) == pytest.approx(3.0 * 0.005, abs=1e-12)

    def test_single_robot_never_slows(self):
        layout = default_layout()
        dep = factory.spawn(layout, 1, 1, seed=4)
        for _ in range(2000):
            factory.step_mobility(dep, layout, dt_s=0.005)
            assert not dep.robots[0].slowdown_flag
            assert dep.robots[0].speed_mps == 3.0

    def test_min_separation_over_long_run(self):
        layout = default_layout()
        dep = factory.spawn(layout, 12, 1, seed=6)
        worst = np.inf
        for _ in range(10_000):
            factory.step_mobility(dep, layout, dt_s=0.005)
            pos = dep.ap_positions()
            d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            worst = min(worst, d.min())
        assert worst >= dep.min_separation_m - 1e-9

    def test_robots_stay_on_lanes(self):
        layout = default_layout()
        dep = factory.spawn(layout, 8, 1, seed=7)
        for _ in range(5000):
            factory.step_mobility(dep, layout, dt_s=0.005)
        assert robots_on_lane_area(dep, layout)

    def test_deterministic_trajectories(self):
        layout = default_layout()
        a = factory.spawn(layout, 6, 1, seed=8)
        b = factory.spawn(layout, 6, 1, seed=8)
        for _ in range(500):
            factory.step_mobility(a, layout, dt_s=0.005)
            factory.step_mobility(b, layout, dt_s=0.005)
        assert np.array_equal(a.ap_positions(), b.ap_positions())

    def test_turns_happen(self):
        # over a long horizon robots should visit both axes
        layout = default_layout()
        dep = factory.spawn(layout, 6, 1, seed=9)
        seen_axes = {r.subnetwork_id: {r.axis} for r in dep.robots}
        for _ in range(40_000):
            factory.step_mobility(dep, layout, dt_s=0.005)
            for r in dep.robots:
                seen_axes[r.subnetwork_id].add(r.axis)
        assert any(len(axes) > 1 for axes in seen_axes.values())

    def test_bad_dt(self):
        layout = default_layout()
        dep = factory.spawn(layout, 1, 1, seed=0)
        with pytest.raises(ValueError):
            factory.step_mobility(dep, layout, dt_s=0.0)

    def test_open_hall_mobility(self):
        layout = factory.build_layout(0, LayoutConfig(obstacle_cols=0, obstacle_rows=0))
        dep = factory.spawn(layout, 4, 1, seed=10)
        for _ in range(3000):
            factory.step_mobility(dep, layout, dt_s=0.005)
        pos = dep.ap_positions()
        assert np.all((pos[:, 0] >= 0) & (pos[:, 0] <= layout.width_m))
        assert np.all((pos[:, 1] >= 0) & (pos[:, 1] <= layout.height_m))


class TestSerialization:
    def test_layout_and_deployment_json(self):
        layout = default_layout()
        dep = factory.spawn(layout, 5, 2, seed=11)
        factory.step_mobility(dep, layout, dt_s=0.005)
        blob = json.dumps({"layout": layout.to_dict(), "deployment": dep.to_dict()})
        back = json.loads(blob)
        assert back["layout"]["width_m"] == 180.0
        assert len(back["deployment"]["robots"]) == 5
        robot = back["deployment"]["robots"][0]
        assert set(robot) >= {"subnetwork_id", "position", "heading", "speed_mps",
                              "slowdown_flag", "route", "device_offsets"}
