"""Continuous 2D point-mass navigation with axis-aligned walls.

The body is a point under acceleration control: velocity integrates the
(clipped) action, speed is capped, and wall collisions resolve by
axis-separated sliding (move x, then y; a blocked axis zeroes that velocity
component). Also provides a discretized visitation recorder used for maps,
and a scripted waypoint controller that proves the builtin tasks solvable.

Rectangles are (x0, y0, x1, y1) tuples throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

Rect = tuple[float, float, float, float]


@dataclass(frozen=True)
class EnvSpec:
    name: str
    bounds: Rect
    walls: list
    start_region: Rect
    task_goal_region: Rect
    epsilon_task: float = 0.5
    max_primitive_steps: int = 500
    action_bounds: float = 1.0
    dt: float = 0.1
    max_speed: float = 1.0


@dataclass
class EnvState:
    position: np.ndarray
    velocity: np.ndarray
    steps_taken: int = 0


@dataclass
class VisitGrid:
    """Counts of recorded states on a resolution x resolution grid over
    bounds; counts[ix, iy] with ix along x and iy along y."""

    bounds: Rect
    resolution: int = 64
    counts: np.ndarray = None
    recorded: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.resolution, self.resolution), dtype=np.int64)


def rect_valid(r: Rect) -> bool:
    return len(r) == 4 and r[0] < r[2] and r[1] < r[3] and all(np.isfinite(r))


def rect_inside(inner: Rect, outer: Rect) -> bool:
    return (inner[0] >= outer[0] and inner[1] >= outer[1]
            and inner[2] <= outer[2] and inner[3] <= outer[3])


def rects_overlap(a: Rect, b: Rect) -> bool:
    """True when the interiors intersect."""
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def in_interior(r: Rect, x: float, y: float) -> bool:
    return r[0] < x < r[2] and r[1] < y < r[3]


def sample_in_rect(r: Rect, rng: np.random.Generator) -> np.ndarray:
    return np.array([rng.uniform(r[0], r[2]), rng.uniform(r[1], r[3])])


def validate_spec(spec: EnvSpec) -> EnvSpec:
    for label, r in (("bounds", spec.bounds), ("start_region", spec.start_region),
                     ("task_goal_region", spec.task_goal_region)):
        if not rect_valid(r):
            raise ConfigError(f"{label} is not a valid rectangle: {r}")
    for region_label, region in (("start_region", spec.start_region),
                                 ("task_goal_region", spec.task_goal_region)):
        if not rect_inside(region, spec.bounds):
            raise ConfigError(f"{region_label} {region} outside bounds {spec.bounds}")
        for w in spec.walls:
            if rects_overlap(region, w):
                raise ConfigError(f"{region_label} {region} intersects wall {w}")
    for w in spec.walls:
        if not rect_valid(w):
            raise ConfigError(f"wall is not a valid rectangle: {w}")
        if not rect_inside(w, spec.bounds):
            raise ConfigError(f"wall {w} outside bounds {spec.bounds}")
    if spec.epsilon_task <= 0 or spec.dt <= 0 or spec.max_speed <= 0 \
            or spec.action_bounds <= 0 or spec.max_primitive_steps <= 0:
        raise ConfigError("epsilon_task, dt, max_speed, action_bounds, "
                          "max_primitive_steps must all be positive")
    return spec


def env_reset(spec: EnvSpec, rng: np.random.Generator):
    """Sample (state, task_goal): position uniform in the start region,
    velocity zero, goal uniform in the goal region."""
    state = EnvState(sample_in_rect(spec.start_region, rng), np.zeros(2), 0)
    goal = sample_in_rect(spec.task_goal_region, rng)
    return state, goal


def _slide(pos, delta, axis, walls, bounds):
    """Move one axis coordinate by delta, stopping at the first obstacle
    face crossed. Returns (new_coordinate, blocked)."""
    p = float(pos[axis])
    other = float(pos[1 - axis])
    c = p + delta
    blocked = False
    b_lo, b_hi = bounds[axis], bounds[axis + 2]
    if c < b_lo:
        c, blocked = b_lo, True
    elif c > b_hi:
        c, blocked = b_hi, True
    for w in walls:
        o_lo, o_hi = w[1 - axis], w[1 - axis + 2]
        if not (o_lo < other < o_hi):
            continue
        w_lo, w_hi = w[axis], w[axis + 2]
        if delta > 0 and p <= w_lo < c:
            c, blocked = w_lo, True
        elif delta < 0 and c < w_hi <= p:
            c, blocked = w_hi, True
    return c, blocked


def env_step(spec: EnvSpec, state: EnvState, action) -> EnvState:
    """Advance one timestep; pure function of (spec, state, action)."""
    try:
        ax, ay = float(action[0]), float(action[1])
    except (TypeError, IndexError, ValueError):
        raise ValueError(f"action must be a finite 2-vector, got {action!r}")
    if len(action) != 2 or not (math.isfinite(ax) and math.isfinite(ay)):
        raise ValueError(f"action must be a finite 2-vector, got {action!r}")
    ab = spec.action_bounds
    ax = -ab if ax < -ab else (ab if ax > ab else ax)
    ay = -ab if ay < -ab else (ab if ay > ab else ay)
    vx = float(state.velocity[0]) + ax * spec.dt
    vy = float(state.velocity[1]) + ay * spec.dt
    speed = math.hypot(vx, vy)
    if speed > spec.max_speed:
        scale = spec.max_speed / speed
        vx *= scale
        vy *= scale
    pos = state.position.copy()
    new_x, bx = _slide(pos, vx * spec.dt, 0, spec.walls, spec.bounds)
    pos[0] = new_x
    new_y, by = _slide(pos, vy * spec.dt, 1, spec.walls, spec.bounds)
    pos[1] = new_y
    v = np.array([0.0 if bx else vx, 0.0 if by else vy])
    return EnvState(pos, v, state.steps_taken + 1)


def _cross_walls(thickness=0.25):
    """Four-rooms interior: a cross of walls with 3 doorways (the passage
    between the right two rooms stays closed)."""
    t = thickness / 2.0
    return [
        (5 - t, 0.0, 5 + t, 2.0),    # vertical, below the lower doorway
        (5 - t, 3.0, 5 + t, 7.0),    # vertical, between the two doorways
        (5 - t, 8.0, 5 + t, 10.0),   # vertical, above the upper doorway
        (0.0, 5 - t, 2.0, 5 + t),    # horizontal, left of the left doorway
        (3.0, 5 - t, 10.0, 5 + t),   # horizontal, right arm solid
    ]


def _spiral_cell_order(n: int):
    """Cells of an n x n grid in outward spiral order starting at the
    innermost cell; consecutive cells are orthogonal neighbors."""
    order = []
    seen = set()
    x, y = 0, 0
    dx, dy = 1, 0
    for _ in range(n * n):
        order.append((x, y))
        seen.add((x, y))
        nx, ny = x + dx, y + dy
        if not (0 <= nx < n and 0 <= ny < n and (nx, ny) not in seen):
            dx, dy = -dy, dx
            nx, ny = x + dx, y + dy
        x, y = nx, ny
    order.reverse()
    return order


def spiral_spec(cells: int = 7, cell_size: float = 1.25, wall_thickness: float = 0.25,
                max_steps: int = 1000, epsilon: float = 0.5,
                name: str = "spiral_maze") -> EnvSpec:
    """Single-corridor spiral maze built on a cells x cells grid.

    The corridor visits every grid cell once in spiral order; walls separate
    any adjacent cells that are not consecutive on the path. Start is the
    innermost cell, goal the outermost end of the corridor. Shortest path
    length is about (cells^2 - 1) * cell_size world units.
    """
    if cells < 2:
        raise ConfigError(f"spiral needs at least 2 cells per side, got {cells}")
    n, c, t = cells, cell_size, wall_thickness
    side = n * c
    order = _spiral_cell_order(n)
    pathset = set(zip(order, order[1:]))

    def connected(a, b):
        return (a, b) in pathset or (b, a) in pathset

    walls = []
    for i in range(n):
        for j in range(n):
            if i + 1 < n and not connected((i, j), (i + 1, j)):
                x = (i + 1) * c
                walls.append((x - t / 2, j * c - t / 2, x + t / 2, (j + 1) * c + t / 2))
            if j + 1 < n and not connected((i, j), (i, j + 1)):
                y = (j + 1) * c
                walls.append((i * c - t / 2, y - t / 2, i * c + c + t / 2, y + t / 2))
    walls = [(max(w[0], 0.0), max(w[1], 0.0), min(w[2], side), min(w[3], side))
             for w in walls]

    def cell_center(ij):
        return ((ij[0] + 0.5) * c, (ij[1] + 0.5) * c)

    sx, sy = cell_center(order[0])
    gx, gy = cell_center(order[-1])
    r = 0.3
    return validate_spec(EnvSpec(
        name=name,
        bounds=(0.0, 0.0, side, side),
        walls=walls,
        start_region=(sx - r, sy - r, sx + r, sy + r),
        task_goal_region=(gx - r, gy - r, gx + r, gy + r),
        epsilon_task=epsilon,
        max_primitive_steps=max_steps,
    ))


def builtin_spec(name: str) -> EnvSpec:
    """Fixed, documented task geometries.

    four_rooms: 10x10, one route through 3 doorways, shortest path about
    120 primitive steps. open_field: 80x80, no interior walls, center to
    corner, about 500 steps. spiral_maze: 8.75x8.75 single spiral corridor,
    center to outer end, about 600 steps. open_field_near is a desk-scale
    extra: the open field arena with the goal 3 units from the start.
    """
    if name == "four_rooms":
        return validate_spec(EnvSpec(
            name=name,
            bounds=(0.0, 0.0, 10.0, 10.0),
            walls=_cross_walls(),
            start_region=(0.75, 0.75, 1.75, 1.75),
            task_goal_region=(8.25, 8.25, 9.25, 9.25),
            epsilon_task=0.5,
            max_primitive_steps=300,
        ))
    if name == "open_field":
        return validate_spec(EnvSpec(
            name=name,
            bounds=(0.0, 0.0, 80.0, 80.0),
            walls=[],
            start_region=(39.0, 39.0, 41.0, 41.0),
            task_goal_region=(75.0, 75.0, 77.0, 77.0),
            epsilon_task=0.5,
            max_primitive_steps=800,
        ))
    if name == "open_field_near":
        return validate_spec(EnvSpec(
            name="open_field_near",
            bounds=(0.0, 0.0, 80.0, 80.0),
            walls=[],
            start_region=(39.0, 39.0, 41.0, 41.0),
            task_goal_region=(42.5, 39.5, 43.5, 40.5),
            epsilon_task=0.5,
            max_primitive_steps=100,
        ))
    if name == "spiral_maze":
        return spiral_spec(cells=7)
    raise ConfigError(f"unknown environment {name!r}")


BUILTIN_NAMES = ("four_rooms", "open_field", "open_field_near", "spiral_maze")


def builtin_waypoints(name: str) -> list:
    """Hand-placed route for the scripted controller; proves each builtin
    task solvable and calibrates its path length."""
    if name == "four_rooms":
        return [np.array(p) for p in
                [(2.5, 4.2), (2.5, 5.8), (4.2, 7.5), (5.8, 7.5), (8.75, 8.75)]]
    if name == "open_field":
        return [np.array([76.0, 76.0])]
    if name == "open_field_near":
        return [np.array([43.0, 40.0])]
    if name == "spiral_maze":
        c = 1.25
        return [np.array([(i + 0.5) * c, (j + 0.5) * c]) for i, j in _spiral_cell_order(7)]
    raise ConfigError(f"unknown environment {name!r}")


def waypoint_action(state: EnvState, waypoint, spec: EnvSpec):
    """Proportional tracking controller: accelerate toward the velocity that
    closes the gap to the waypoint."""
    err = waypoint - state.position
    desired = err / max(spec.dt * 10.0, 1e-9)
    speed = float(np.linalg.norm(desired))
    if speed > spec.max_speed:
        desired = desired * (spec.max_speed / speed)
    return np.clip((desired - state.velocity) / spec.dt,
                   -spec.action_bounds, spec.action_bounds)


def follow_waypoints(spec: EnvSpec, waypoints, start_state: EnvState,
                     reach_radius: float = 0.35, max_steps: int | None = None):
    """Run the scripted controller through the waypoint list; returns the
    visited states (including the start)."""
    state = start_state
    states = [state]
    budget = max_steps if max_steps is not None else spec.max_primitive_steps
    idx = 0
    for _ in range(budget):
        if idx >= len(waypoints):
            break
        state = env_step(spec, state, waypoint_action(state, waypoints[idx], spec))
        states.append(state)
        if np.linalg.norm(state.position - waypoints[idx]) < reach_radius:
            idx += 1
    return states


def record_visit(grid: VisitGrid, state) -> VisitGrid:
    """Increment the count of the cell containing the state's position."""
    pos = state.position if isinstance(state, EnvState) else np.asarray(state, dtype=float)
    x0, y0, x1, y1 = grid.bounds
    if not (x0 <= pos[0] <= x1 and y0 <= pos[1] <= y1):
        raise ValueError(f"position {pos} outside bounds {grid.bounds}; physics bug?")
    res = grid.resolution
    ix = min(int((pos[0] - x0) / (x1 - x0) * res), res - 1)
    iy = min(int((pos[1] - y0) / (y1 - y0) * res), res - 1)
    grid.counts[ix, iy] += 1
    grid.recorded += 1
    return grid


def grid_to_image(grid: VisitGrid) -> bytes:
    """Render counts as a binary portable graymap (P5), log-scaled to 0..255.

    Image rows run top to bottom, i.e. decreasing y.
    """
    c = grid.counts
    mx = c.max()
    if mx > 0:
        px = np.rint(np.log1p(c) / np.log1p(mx) * 255.0).astype(np.uint8)
    else:
        px = np.zeros_like(c, dtype=np.uint8)
    img = px.T[::-1, :]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + img.tobytes()


def bool_grid_to_image(flags: np.ndarray) -> bytes:
    """Render a boolean [ix, iy] grid as a P5 graymap (true = 255)."""
    px = np.where(flags, 255, 0).astype(np.uint8)
    img = px.T[::-1, :]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + img.tobytes()


def bool_grid_to_text(flags: np.ndarray) -> str:
    """Rows of 0/1 characters, top row = highest y."""
    img = flags.T[::-1, :]
    return "\n".join("".join("1" if v else "0" for v in row) for row in img) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def spec_to_text(spec: EnvSpec) -> str:
    """Serialize geometry as plain key = value text (one wall per line)."""
    lines = [
        "[env]",
        f"name = {spec.name}",
        f"bounds = {' '.join(_fmt(v) for v in spec.bounds)}",
        f"start = {' '.join(_fmt(v) for v in spec.start_region)}",
        f"goal = {' '.join(_fmt(v) for v in spec.task_goal_region)}",
        f"epsilon = {_fmt(spec.epsilon_task)}",
        f"max_steps = {spec.max_primitive_steps}",
        f"action_bounds = {_fmt(spec.action_bounds)}",
        f"dt = {_fmt(spec.dt)}",
        f"max_speed = {_fmt(spec.max_speed)}",
    ]
    for w in spec.walls:
        lines.append(f"wall = {' '.join(_fmt(v) for v in w)}")
    return "\n".join(lines) + "\n"


def spec_from_text(text: str) -> EnvSpec:
    fields = {"name": "custom", "epsilon": 0.5, "max_steps": 500,
              "action_bounds": 1.0, "dt": 0.1, "max_speed": 1.0}
    rects = {}
    walls = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigError(f"bad geometry line: {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in ("bounds", "start", "goal", "wall"):
            parts = val.split()
            if len(parts) != 4:
                raise ConfigError(f"{key} needs 4 numbers, got {val!r}")
            rect = tuple(float(p) for p in parts)
            if key == "wall":
                walls.append(rect)
            else:
                rects[key] = rect
        elif key == "name":
            fields["name"] = val
        elif key == "max_steps":
            fields["max_steps"] = int(val)
        elif key in ("epsilon", "action_bounds", "dt", "max_speed"):
            fields[key] = float(val)
        else:
            raise ConfigError(f"unknown geometry key {key!r}")
    for needed in ("bounds", "start", "goal"):
        if needed not in rects:
            raise ConfigError(f"geometry text missing {needed!r}")
    return validate_spec(EnvSpec(
        name=fields["name"], bounds=rects["bounds"], walls=walls,
        start_region=rects["start"], task_goal_region=rects["goal"],
        epsilon_task=fields["epsilon"], max_primitive_steps=fields["max_steps"],
        action_bounds=fields["action_bounds"], dt=fields["dt"],
        max_speed=fields["max_speed"]))


def load_spec(name_or_path: str) -> EnvSpec:
    """Builtin name, or a path to a geometry text file."""
    if name_or_path in BUILTIN_NAMES:
        return builtin_spec(name_or_path)
    import os
    if os.path.exists(name_or_path):
        with open(name_or_path) as f:
            return spec_from_text(f.read())
    raise ConfigError(f"unknown environment {name_or_path!r} (not a builtin, not a file)")
