"""Parameterized factory floor and in-robot subnetwork mobility.

The hall is a width x height rectangle filled with a grid of rectangular
work zones separated by two-lane alleys (right-hand traffic). Robots carry
one subnetwork each and drive along lane center lines at up to 3 m/s,
taking uniformly random turns at alley crossings and U-turning at walls.
Collision avoidance gives priority to the robot closest to a contested
intersection and, as a hard backstop, refuses any displacement that would
bring two access points closer than the minimum separation distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STRAIGHT, RIGHT, LEFT = 0, 1, 2


class LayoutError(ValueError):
    """Layout configuration cannot produce a valid floor plan."""


class SpawnError(RuntimeError):
    """Could not place the requested number of robots at minimum separation."""


@dataclass
class LayoutConfig:
    width_m: float = 180.0
    height_m: float = 80.0
    alley_width_m: float = 5.0
    obstacle_cols: int = 3
    obstacle_rows: int = 2


@dataclass(frozen=True)
class FactoryLayout:
    width_m: float
    height_m: float
    alley_width_m: float
    vertical_xs: tuple  # alley center x-coordinates
    horizontal_ys: tuple  # alley center y-coordinates
    zones: tuple  # (x0, y0, x1, y1) obstacle rectangles
    intersections: tuple  # (x, y) alley crossing centers

    @property
    def lane_offset(self) -> float:
        # lane center line sits a quarter alley width from the alley center
        return self.alley_width_m / 4.0

    def alley_area(self) -> float:
        nv, nh = len(self.vertical_xs), len(self.horizontal_ys)
        a = self.alley_width_m
        return nv * a * self.height_m + nh * a * self.width_m - nv * nh * a * a

    def to_dict(self) -> dict:
        return {
            "width_m": self.width_m,
            "height_m": self.height_m,
            "alley_width_m": self.alley_width_m,
            "vertical_xs": list(self.vertical_xs),
            "horizontal_ys": list(self.horizontal_ys),
            "zones": [list(z) for z in self.zones],
            "intersections": [list(p) for p in self.intersections],
        }


def build_layout(seed: int, config: LayoutConfig) -> FactoryLayout:
    """Deterministic obstacle-grid layout; seed reserved for randomized variants."""
    w, h, a = config.width_m, config.height_m, config.alley_width_m
    if w <= 0 or h <= 0:
        raise LayoutError("hall dimensions must be positive")
    if a > min(w, h):
        raise LayoutError("alley width exceeds the hall")
    cols, rows = config.obstacle_cols, config.obstacle_rows
    if cols <= 0 or rows <= 0:
        # open hall: no zones, no alleys
        return FactoryLayout(w, h, a, (), (), (), ())

    n_v, n_h = cols - 1, rows - 1
    block_w = (w - n_v * a) / cols
    block_h = (h - n_h * a) / rows
    if block_w <= 0 or block_h <= 0:
        raise LayoutError("obstacle grid does not fit the hall")

    vertical_xs = tuple((i + 1) * block_w + i * a + a / 2.0 for i in range(n_v))
    horizontal_ys = tuple((j + 1) * block_h + j * a + a / 2.0 for j in range(n_h))

    x_edges = [0.0]
    for c in vertical_xs:
        x_edges += [c - a / 2.0, c + a / 2.0]
    x_edges.append(w)
    y_edges = [0.0]
    for c in horizontal_ys:
        y_edges += [c - a / 2.0, c + a / 2.0]
    y_edges.append(h)
    zones = tuple(
        (x_edges[2 * i], y_edges[2 * j], x_edges[2 * i + 1], y_edges[2 * j + 1])
        for i in range(cols)
        for j in range(rows)
    )
    intersections = tuple((x, y) for x in vertical_xs for y in horizontal_ys)
    return FactoryLayout(w, h, a, vertical_xs, horizontal_ys, zones, intersections)


@dataclass
class RobotState:
    """One in-robot subnetwork moving along the lane network.

    axis 1 = driving along a vertical alley, axis 0 = horizontal alley,
    axis -1 = open-hall fallback (no alleys). The lateral lane position is
    implied by (axis, alley, direction) under right-hand traffic.
    """

    subnetwork_id: int
    axis: int
    alley: int
    direction: int
    coord: float
    free_transverse: float
    speed_mps: float
    max_speed_mps: float
    slowdown_flag: bool
    device_offsets: np.ndarray
    pending: tuple | None = None  # (crossing alley idx, center coord, choice)
    route: list = field(default_factory=list)
    rng: np.random.Generator = field(repr=False, default=None)

    def position_xy(self, layout: FactoryLayout):
        off = layout.lane_offset
        if self.axis == 1:
            return layout.vertical_xs[self.alley] + self.direction * off, self.coord
        if self.axis == 0:
            return self.coord, layout.horizontal_ys[self.alley] - self.direction * off
        return self.coord, self.free_transverse

    def position(self, layout: FactoryLayout) -> np.ndarray:
        return np.array(self.position_xy(layout))

    @property
    def heading(self) -> float:
        if self.axis == 1:
            return math.pi / 2.0 if self.direction > 0 else -math.pi / 2.0
        return 0.0 if self.direction > 0 else math.pi

    def motion_key(self):
        return (self.axis, self.alley, self.direction, self.coord, self.pending)


@dataclass
class Deployment:
    robots: list
    min_separation_m: float
    devices_per_subnetwork: int
    layout: FactoryLayout

    def ap_positions(self) -> np.ndarray:
        return np.array([r.position_xy(self.layout) for r in self.robots])

    def device_positions(self) -> np.ndarray:
        aps = self.ap_positions()
        offs = np.array([r.device_offsets for r in self.robots])
        return aps[:, None, :] + offs

    def to_dict(self) -> dict:
        return {
            "min_separation_m": self.min_separation_m,
            "devices_per_subnetwork": self.devices_per_subnetwork,
            "robots": [
                {
                    "subnetwork_id": r.subnetwork_id,
                    "position": [float(v) for v in r.position_xy(self.layout)],
                    "heading": r.heading,
                    "speed_mps": r.speed_mps,
                    "slowdown_flag": r.slowdown_flag,
                    "route": [list(map(float, p)) for p in _route_preview(self.layout, r)],
                    "device_offsets": r.device_offsets.tolist(),
                }
                for r in self.robots
            ],
        }


def _lane_tuples(layout: FactoryLayout):
    lanes = []
    for i in range(len(layout.vertical_xs)):
        lanes += [(1, i, 1), (1, i, -1)]
    for j in range(len(layout.horizontal_ys)):
        lanes += [(0, j, 1), (0, j, -1)]
    return lanes


def _lane_extent(layout: FactoryLayout, axis: int) -> float:
    return layout.height_m if axis == 1 else layout.width_m


def _crossing_centers(layout: FactoryLayout, axis: int):
    return layout.horizontal_ys if axis == 1 else layout.vertical_xs


def spawn(
    layout: FactoryLayout,
    n: int,
    m_per_subnet: int,
    seed: int,
    min_separation_m: float = 1.0,
    coverage_radius_m: float = 1.0,
    max_speed_mps: float = 3.0,
) -> Deployment:
    """Place n robots on lanes at pairwise distance >= min separation."""
    if n < 1 or m_per_subnet < 1:
        raise ValueError("need at least one robot and one device")
    seq = np.random.SeedSequence(seed)
    children = seq.spawn(n + 1)
    place_rng = np.random.default_rng(children[0])
    lanes = _lane_tuples(layout)
    off = layout.lane_offset

    robots = []
    positions = []
    attempts = 0
    while len(robots) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise SpawnError(f"could not place {n} robots at {min_separation_m} m separation")
        if lanes:
            axis, alley, direction = lanes[place_rng.integers(len(lanes))]
            extent = _lane_extent(layout, axis)
            coord = place_rng.uniform(off, extent - off)
            free_t = 0.0
        else:
            axis, alley, direction = -1, 0, (1 if place_rng.random() < 0.5 else -1)
            coord = place_rng.uniform(off, layout.width_m - off)
            free_t = place_rng.uniform(off, layout.height_m - off)
        rid = len(robots)
        robot = RobotState(
            subnetwork_id=rid,
            axis=axis,
            alley=alley,
            direction=direction,
            coord=coord,
            free_transverse=free_t,
            speed_mps=max_speed_mps,
            max_speed_mps=max_speed_mps,
            slowdown_flag=False,
            device_offsets=_disc_offsets(place_rng, m_per_subnet, coverage_radius_m),
            rng=np.random.default_rng(children[rid + 1]),
        )
        p = robot.position(layout)
        if positions and np.min(np.linalg.norm(np.array(positions) - p, axis=1)) < min_separation_m:
            continue
        robots.append(robot)
        positions.append(p)
    return Deployment(robots, min_separation_m, m_per_subnet, layout)


def _disc_offsets(rng, m: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=m))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _next_crossing(layout: FactoryLayout, robot: RobotState):
    """Nearest crossing alley whose near edge is still ahead, or None."""
    if robot.axis not in (0, 1):
        return None
    off = layout.lane_offset
    best = None
    for idx, c in enumerate(_crossing_centers(layout, robot.axis)):
        gap = (c - robot.direction * off - robot.coord) * robot.direction
        if gap > 1e-9 and (best is None or gap < best[0]):
            best = (gap, idx, c)
    return None if best is None else (best[1], best[2])


def _turned(axis: int, direction: int, choice: int):
    """(new_axis, new_direction) after a right or left turn."""
    new_axis = 1 - axis
    if choice == RIGHT:
        new_dir = direction if axis == 1 else -direction
    else:
        new_dir = -direction if axis == 1 else direction
    return new_axis, new_dir


def _advance(layout: FactoryLayout, robot: RobotState, dist: float) -> None:
    """Move the robot dist meters along its route, handling turns and walls."""
    off = layout.lane_offset
    for _ in range(8):
        if dist <= 1e-12:
            break
        if robot.axis == -1:
            lo, hi = off, layout.width_m - off
            target = hi if robot.direction > 0 else lo
            gap = (target - robot.coord) * robot.direction
            if dist < gap:
                robot.coord += robot.direction * dist
                return
            robot.coord = target
            robot.direction = -robot.direction
            dist -= gap
            continue
        extent = _lane_extent(layout, robot.axis)
        wall = extent - off if robot.direction > 0 else off
        wall_gap = (wall - robot.coord) * robot.direction
        event_gap, event = wall_gap, "wall"
        if robot.pending is not None:
            alley_idx, center, choice = robot.pending
            if choice == RIGHT:
                turn_at = center - robot.direction * off
            elif choice == LEFT:
                turn_at = center + robot.direction * off
            else:
                turn_at = None
            if turn_at is not None:
                gap = (turn_at - robot.coord) * robot.direction
                if 0.0 <= gap < event_gap:
                    event_gap, event = gap, "turn"
        if dist < event_gap:
            robot.coord += robot.direction * dist
            dist = 0.0
        elif event == "turn":
            alley_idx, center, choice = robot.pending
            old_axis, old_dir = robot.axis, robot.direction
            own_center = _alley_center(layout, old_axis, robot.alley)
            robot.axis, robot.direction = _turned(old_axis, old_dir, choice)
            robot.alley = alley_idx
            robot.coord = own_center + old_dir * off if old_axis == 1 else own_center - old_dir * off
            robot.pending = None
            dist -= event_gap
        else:
            robot.coord = wall
            robot.direction = -robot.direction
            robot.pending = None
            dist -= event_gap
    # a straight decision expires once the far edge is behind us
    if robot.pending is not None and robot.pending[2] == STRAIGHT:
        far = robot.pending[1] + robot.direction * off
        if (robot.coord - far) * robot.direction >= 0.0:
            robot.pending = None


def _alley_center(layout: FactoryLayout, axis: int, alley: int) -> float:
    return layout.vertical_xs[alley] if axis == 1 else layout.horizontal_ys[alley]


def step_mobility(
    deployment: Deployment,
    layout: FactoryLayout,
    dt_s: float,
    conflict_radius_m: float | None = None,
) -> Deployment:
    """Advance all robots by dt under traffic rules; updates in place.

    Conflict order is deterministic: intersection priority goes to the robot
    closest to the crossing, and displacement commits run in subnetwork-id
    order with a hard minimum-separation guard.
    """
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    robots = deployment.robots
    d_min = deployment.min_separation_m
    radius = conflict_radius_m if conflict_radius_m is not None else layout.alley_width_m

    # phase 0: refill pending route decisions (fixed per-robot RNG streams)
    for r in robots:
        if r.axis in (0, 1) and r.pending is None:
            nxt = _next_crossing(layout, r)
            if nxt is not None:
                choice = int(r.rng.integers(3))
                r.pending = (nxt[0], nxt[1], choice)

    # phase 1: intersection priority, closest robot keeps speed
    for r in robots:
        r.slowdown_flag = False
    for px, py in layout.intersections:
        contenders = []
        for r in robots:
            if r.axis not in (0, 1):
                continue
            center = _alley_center(layout, r.axis, r.alley)
            on_alley = abs(center - (px if r.axis == 1 else py)) < 1e-9
            target = py if r.axis == 1 else px
            if on_alley and (target - r.coord) * r.direction > 0:
                x, y = r.position_xy(layout)
                dist = math.hypot(x - px, y - py)
                if dist <= radius:
                    contenders.append((dist, r.subnetwork_id, r))
        if len(contenders) > 1:
            contenders.sort(key=lambda t: (t[0], t[1]))
            for _, _, r in contenders[1:]:
                r.slowdown_flag = True
    for r in robots:
        if r.slowdown_flag:
            r.speed_mps = r.speed_mps / 2.0
        else:
            r.speed_mps = r.max_speed_mps

    # phase 2: commit displacements in id order with the separation guard
    d_min2 = d_min * d_min
    new_positions = [r.position_xy(layout) for r in robots]
    n_rob = len(robots)
    for idx, r in enumerate(robots):
        committed = False
        for speed in (r.speed_mps, r.speed_mps / 2.0):
            trial = _copy_motion(r)
            _advance(layout, trial, speed * dt_s)
            x, y = trial.position_xy(layout)
            ok = True
            for j in range(n_rob):
                if j == idx:
                    continue
                qx, qy = new_positions[j]
                dx, dy = x - qx, y - qy
                if dx * dx + dy * dy < d_min2:
                    ok = False
                    break
            if ok:
                _apply_motion(r, trial)
                new_positions[idx] = (x, y)
                committed = True
                break
        if not committed:
            r.slowdown_flag = True  # blocked in place this step
    return deployment


def _copy_motion(r: RobotState) -> RobotState:
    return RobotState(
        subnetwork_id=r.subnetwork_id,
        axis=r.axis,
        alley=r.alley,
        direction=r.direction,
        coord=r.coord,
        free_transverse=r.free_transverse,
        speed_mps=r.speed_mps,
        max_speed_mps=r.max_speed_mps,
        slowdown_flag=r.slowdown_flag,
        device_offsets=r.device_offsets,
        pending=r.pending,
    )


def _apply_motion(r: RobotState, trial: RobotState) -> None:
    r.axis, r.alley, r.direction = trial.axis, trial.alley, trial.direction
    r.coord, r.pending = trial.coord, trial.pending


def _route_preview(layout: FactoryLayout, r: RobotState) -> list:
    if r.axis not in (0, 1) or r.pending is None:
        return []
    _, center, choice = r.pending
    off = layout.lane_offset
    if choice == RIGHT:
        at = center - r.direction * off
    else:
        at = center + r.direction * off
    if r.axis == 1:
        return [(layout.vertical_xs[r.alley] + r.direction * off, at)]
    return [(at, layout.horizontal_ys[r.alley] - r.direction * off)]
