# -*- coding: utf-8 -*-

"""Rule based expert that supplies demonstration trajectories.

The expert plans on a robot aligned occupancy grid with Dijkstra search. Walls
are inflated by the robot radius plus a margin, standing groups are blocked
by their hull, and walking people block the cells they will occupy around the
time the robot would reach them. A lateral cost keeps the robot to the right
of the straight line towards the goal. The search result is smoothed and
resampled into ten poses one second apart, at a speed that depends on how
crowded or occluded the scene is.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from socialnav.geometry import Trajectory, wrap_angles
from socialnav.sim.sensors import group_hull
from socialnav.sim.world import HUMAN_RADIUS, ROBOT_RADIUS, segment_distances

LOGGER = logging.getLogger(__name__)

HORIZON = 10
GRID_RESOLUTION = 0.2
GRID_BACK = 2.0
GRID_FORWARD = 9.0
GRID_SIDE = 5.0
WALL_INFLATION = ROBOT_RADIUS + 0.05
PERSONAL_CLEARANCE = 0.5
CLEARANCE_MARGIN = 0.15
TIME_WINDOW = 1.0
PREDICTION_STEP = 0.5
KEEP_RIGHT_WEIGHT = 2.0
GOAL_TOLERANCE = 0.2

SPEED_MODES = {
    'normal': 0.5,
    'slow': 0.25,
    'yield': 0.05,
}
YIELD_DISTANCE = 1.5
YIELD_CONE = np.pi / 3
CORNER_DISTANCE = 3.0
ONCOMING_DISTANCE = 6.0
ONCOMING_WIDTH = 2.0


@dataclass
class SceneAssessment:
    """Coarse reading of the scene shared by the expert and the caption oracle."""

    speed_mode: str
    corner_ahead: bool
    person_in_cone: bool
    oncoming: bool
    nearest_person: float


@dataclass
class ExpertPlan:
    """Result of ``plan_expert``.

    Attributes:
        trajectory (Trajectory):
            Ten poses in the robot frame, one second apart, the first at the origin.
        speed_mode (str):
            One of ``SPEED_MODES``.
        stopped (bool):
            Whether no feasible path was found and the robot holds its pose.
    """

    trajectory: Trajectory
    speed_mode: str
    stopped: bool = False


def assess_scene(world):
    """Classify the current scene into a speed mode.

    A person within ``YIELD_DISTANCE`` inside the forward cone forces a yield.
    Otherwise a corner closer than ``CORNER_DISTANCE`` ahead forces slow motion.
    """
    pose = world.robot
    nearest = np.inf
    in_cone = False
    oncoming = False
    heading = np.array([np.cos(pose.phi), np.sin(pose.phi)])

    for human in world.humans:
        forward, left = pose.to_local(human.position)
        distance = np.hypot(forward, left)
        gap = distance - human.radius - ROBOT_RADIUS
        nearest = min(nearest, gap)
        bearing = np.arctan2(left, forward)
        if distance < YIELD_DISTANCE + human.radius and abs(bearing) <= YIELD_CONE:
            in_cone = True

        approaching = human.intended_velocity @ heading < -0.1
        if 0 < forward < ONCOMING_DISTANCE and abs(left) < ONCOMING_WIDTH and approaching:
            oncoming = True

    corner_ahead = False
    for corner in world.corners:
        forward, left = pose.to_local(corner)
        if 0 < forward and np.hypot(forward, left) < CORNER_DISTANCE:
            corner_ahead = True

    if in_cone:
        mode = 'yield'
    elif corner_ahead:
        mode = 'slow'
    else:
        mode = 'normal'

    return SceneAssessment(mode, corner_ahead, in_cone, oncoming, float(nearest))


def _grid():
    forward = np.arange(-GRID_BACK, GRID_FORWARD + 1e-9, GRID_RESOLUTION)
    side = np.arange(-GRID_SIDE, GRID_SIDE + 1e-9, GRID_RESOLUTION)
    mesh = np.stack(np.meshgrid(forward, side, indexing='ij'), axis=-1)
    return mesh, len(forward), len(side)


def _blocked_cells(world, local, speed, social):
    pose = world.robot
    cells = pose.to_world(local)
    blocked = np.zeros(len(local), dtype=bool)

    if len(world.walls):
        blocked |= segment_distances(cells, world.walls).min(axis=1) < WALL_INFLATION

    if not social:
        return blocked

    clearance = HUMAN_RADIUS + PERSONAL_CLEARANCE + CLEARANCE_MARGIN
    grouped = set()
    for group in world.groups:
        if not group.static:
            continue

        positions = world.group_positions(group)
        grouped.update(group.members)
        hull = group_hull(positions, clearance)
        blocked |= hull.contains_points(cells)

    walking = [index for index in range(len(world.humans)) if index not in grouped]
    if walking:
        horizon = HORIZON + TIME_WINDOW
        times, positions = world.predict_humans(horizon, PREDICTION_STEP)
        positions = positions[:, walking]
        radii = np.array([world.humans[index].radius for index in walking])
        arrival = np.linalg.norm(local, axis=1) / speed
        in_window = np.abs(arrival[:, None] - times[None, :]) <= TIME_WINDOW
        gaps = np.linalg.norm(cells[:, None, None, :] - positions[None], axis=3)
        close = np.any(gaps < radii + PERSONAL_CLEARANCE + CLEARANCE_MARGIN, axis=2)
        blocked |= np.any(close & in_window, axis=1)

    return blocked


def _edges(free, rows, cols, local, goal_line):
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    index = np.arange(rows * cols).reshape(rows, cols)
    free = free.reshape(rows, cols)
    origin, direction = goal_line
    normal = np.array([-direction[1], direction[0]])
    left_offset = np.maximum((local - origin) @ normal, 0.0)

    sources, targets, weights = [], [], []
    for d_row, d_col in offsets:
        src = index[max(0, -d_row):rows - max(0, d_row), max(0, -d_col):cols - max(0, d_col)]
        dst = index[max(0, d_row):rows - max(0, -d_row), max(0, d_col):cols - max(0, -d_col)]
        usable = free.reshape(-1)[src] & free.reshape(-1)[dst]
        src, dst = src[usable], dst[usable]
        length = GRID_RESOLUTION * np.hypot(d_row, d_col)
        sources.append(src)
        targets.append(dst)
        weights.append(length * (1.0 + KEEP_RIGHT_WEIGHT * left_offset[dst]))

    sources = np.concatenate(sources)
    targets = np.concatenate(targets)
    weights = np.concatenate(weights)
    return coo_matrix((weights, (sources, targets)), shape=(rows * cols, rows * cols)).tocsr()


def _search(world, speed, social):
    mesh, rows, cols = _grid()
    local = mesh.reshape(-1, 2)
    start = int(np.argmin(np.linalg.norm(local, axis=1)))

    blocked = _blocked_cells(world, local, speed, social)
    blocked[start] = False

    goal = world.robot.relative(world.goal)
    goal_xy = np.array([goal.x, goal.y])
    goal_distance = np.linalg.norm(goal_xy)
    direction = goal_xy / goal_distance if goal_distance > 1e-9 else np.array([1.0, 0.0])

    graph = _edges(~blocked, rows, cols, local, (np.zeros(2), direction))
    costs, predecessors = dijkstra(graph, indices=start, return_predecessors=True)

    reachable = np.isfinite(costs)
    remaining = np.where(reachable, np.linalg.norm(local - goal_xy, axis=1), np.inf)
    target = int(np.argmin(remaining + 1e-6 * np.where(reachable, costs, 0.0)))
    if remaining[target] >= goal_distance - 1e-9:
        return None

    path = [target]
    while path[-1] != start:
        path.append(int(predecessors[path[-1]]))

    return local[path[::-1]]


def _smooth(path, world, social):
    if len(path) < 3:
        return path

    smoothed = path.copy()
    smoothed[1:-1] = (path[:-2] + path[1:-1] + path[2:]) / 3.0
    cells = world.robot.to_world(smoothed)
    if len(world.walls) and segment_distances(cells, world.walls).min() < ROBOT_RADIUS:
        return path

    if social and len(_blocked_hulls(world, cells)):
        return path

    return smoothed


def _blocked_hulls(world, cells):
    hits = []
    for group in world.groups:
        if group.static:
            hull = group_hull(world.group_positions(group), HUMAN_RADIUS + PERSONAL_CLEARANCE)
            if np.any(hull.contains_points(cells)):
                hits.append(group.label)

    return hits


def _resample_path(path, spacing):
    steps = np.linalg.norm(np.diff(path, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    targets = np.minimum(spacing * np.arange(HORIZON), arc[-1])
    keep = np.concatenate([[True], steps > 0])
    arc, path = arc[keep], path[keep]
    if len(path) < 2:
        return np.zeros((HORIZON, 3))

    xy = np.column_stack([
        np.interp(targets, arc, path[:, 0]),
        np.interp(targets, arc, path[:, 1]),
    ])
    xy[0] = 0.0
    segment = np.clip(np.searchsorted(arc, targets, side='right') - 1, 0, len(path) - 2)
    delta = path[segment + 1] - path[segment]
    headings = np.arctan2(delta[:, 1], delta[:, 0])
    headings[0] = 0.0

    return np.column_stack([xy, wrap_angles(headings)])


def stop_in_place():
    return Trajectory(np.zeros((HORIZON, 3)), np.arange(HORIZON, dtype=float))


def plan_expert(world, social=True):
    """Plan the expert's next ten poses in the robot frame.

    Args:
        world (World):
            Current world. Not modified.
        social (bool):
            If ``False`` people and groups are ignored, which yields the nominal
            route used to measure social deviations.

    Returns:
        ExpertPlan
    """
    assessment = assess_scene(world) if social else None
    mode = assessment.speed_mode if social else 'normal'
    spacing = SPEED_MODES[mode]

    if world.goal_distance() < GOAL_TOLERANCE:
        return ExpertPlan(stop_in_place(), mode, stopped=True)

    path = _search(world, spacing, social)
    if path is None:
        LOGGER.debug('No feasible expert path at t=%.1f, holding position', world.time)
        return ExpertPlan(stop_in_place(), mode, stopped=True)

    path = _smooth(path, world, social)
    poses = _resample_path(path, spacing)

    return ExpertPlan(Trajectory(poses, np.arange(HORIZON, dtype=float)), mode)


def scripted_expert(world):
    """Next ten expert poses in the robot frame."""
    return plan_expert(world).trajectory


def lateral_deviation(plan, nominal):
    """Signed lateral offset of ``plan`` from ``nominal`` with the largest magnitude.

    Positive values are to the left of the nominal route.
    """
    poses = plan.poses
    reference = nominal.poses
    headings = reference[:, 2]
    normals = np.column_stack([-np.sin(headings), np.cos(headings)])
    offsets = np.sum((poses[:, :2] - reference[:, :2]) * normals, axis=1)
    return float(offsets[np.argmax(np.abs(offsets))])
