# -*- coding: utf-8 -*-

"""Synthetic sensors: a planar ray-cast LiDAR and an egocentric occupancy raster."""

import logging
from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path
from scipy.spatial import ConvexHull

from socialnav.geometry import Pose
from socialnav.sim.world import HUMAN_RADIUS, segment_distances

LOGGER = logging.getLogger(__name__)

N_BEAMS = 180
MAX_RANGE = 8.0
RASTER_SIZE = 64
RASTER_RESOLUTION = 0.125
RASTER_CHANNELS = ('static', 'human', 'group', 'goal')
HULL_SAMPLES = 12


@dataclass
class SensorFrame:
    """What the robot observes at one instant.

    Attributes:
        scan (numpy.ndarray):
            ``(n_beams,)`` ranges in meters, capped at the maximum range.
        raster (numpy.ndarray):
            ``(4, H, W)`` binary egocentric view.
        goal (Pose):
            Goal expressed in the robot frame.
    """

    scan: np.ndarray
    raster: np.ndarray
    goal: Pose


def beam_angles(n_beams=N_BEAMS):
    """Beam directions relative to the robot heading, starting at ``-pi``."""
    return -np.pi + 2 * np.pi * np.arange(n_beams) / n_beams


def raycast_lidar(pose, world, n_beams=N_BEAMS, max_range=MAX_RANGE):
    """Nearest hit along each beam against walls and human discs.

    Returns:
        numpy.ndarray:
            ``(n_beams,)`` ranges in ``(0, max_range]``.
    """
    if n_beams < 1:
        raise ValueError('n_beams must be at least 1, got {}'.format(n_beams))

    origin = pose.xy
    angles = pose.phi + beam_angles(n_beams)
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    ranges = np.full(n_beams, float(max_range))

    if len(world.walls):
        start = world.walls[:, :2]
        edge = world.walls[:, 2:] - start
        offset = start - origin
        denom = (directions[:, None, 0] * edge[None, :, 1]
                 - directions[:, None, 1] * edge[None, :, 0])
        with np.errstate(divide='ignore', invalid='ignore'):
            along_ray = (offset[None, :, 0] * edge[None, :, 1]
                         - offset[None, :, 1] * edge[None, :, 0]) / denom
            along_wall = (offset[None, :, 0] * directions[:, None, 1]
                          - offset[None, :, 1] * directions[:, None, 0]) / denom

        hit = (np.abs(denom) > 1e-12) & (along_ray > 1e-9) & (along_wall >= 0) & (along_wall <= 1)
        along_ray = np.where(hit, along_ray, np.inf)
        ranges = np.minimum(ranges, along_ray.min(axis=1))

    if world.humans:
        centers = world.human_positions
        radii = np.array([human.radius for human in world.humans])
        offset = origin - centers
        b = directions @ offset.T
        c = np.sum(offset ** 2, axis=1) - radii ** 2
        disc = b ** 2 - c[None, :]
        root = np.sqrt(np.maximum(disc, 0.0))
        near = -b - root
        far = -b + root
        distance = np.where(near > 1e-9, near, far)
        distance = np.where((disc >= 0) & (distance > 1e-9), distance, np.inf)
        ranges = np.minimum(ranges, distance.min(axis=1))

    return ranges


def scan_points(scan, max_range=MAX_RANGE):
    """Robot-frame points for beams that returned before ``max_range``."""
    scan = np.asarray(scan, dtype=float)
    angles = beam_angles(len(scan))
    hits = scan < max_range
    ranges, angles = scan[hits], angles[hits]
    return np.column_stack([ranges * np.cos(angles), ranges * np.sin(angles)])


def world_to_cell(pose, point, size=RASTER_SIZE, resolution=RASTER_RESOLUTION):
    """Raster ``(row, col)`` of a world point, robot at center-bottom facing up."""
    forward, left = pose.to_local(point)
    row = size - 1 - int(np.floor(forward / resolution))
    col = int(np.floor(size / 2 - left / resolution))
    return row, col


def cell_centers(size=RASTER_SIZE, resolution=RASTER_RESOLUTION):
    """Robot-frame ``(forward, left)`` coordinates of every raster cell center."""
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing='ij')
    forward = (size - 1 - rows + 0.5) * resolution
    left = (size / 2 - cols - 0.5) * resolution
    return np.stack([forward, left], axis=-1)


def group_hull(positions, radius):
    """Convex hull around discs of ``radius`` centered at ``positions``."""
    angles = 2 * np.pi * np.arange(HULL_SAMPLES) / HULL_SAMPLES
    ring = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    points = (np.asarray(positions)[:, None, :] + ring[None]).reshape(-1, 2)
    try:
        hull = ConvexHull(points)
    except RuntimeError:
        LOGGER.debug('Degenerate group hull for %s points', len(points))
        return Path(points)

    return Path(points[hull.vertices], closed=False)


def rasterize_view(pose, world, size=RASTER_SIZE, resolution=RASTER_RESOLUTION):
    """Egocentric binary view with static, human, group and goal channels.

    Returns:
        numpy.ndarray:
            ``(4, size, size)`` float32 array of zeros and ones.
    """
    centers = pose.to_world(cell_centers(size, resolution).reshape(-1, 2))
    raster = np.zeros((len(RASTER_CHANNELS), size * size), dtype=np.float32)
    half_diagonal = resolution / np.sqrt(2)

    if len(world.walls):
        raster[0] = segment_distances(centers, world.walls).min(axis=1) <= half_diagonal

    if world.humans:
        gaps = np.linalg.norm(centers[:, None, :] - world.human_positions[None], axis=2)
        raster[1] = np.any(gaps <= HUMAN_RADIUS, axis=1)

    for group in world.groups:
        hull = group_hull(world.group_positions(group), HUMAN_RADIUS)
        raster[2] = np.maximum(raster[2], hull.contains_points(centers))

    goal = pose.relative(world.goal)
    reach = min(np.hypot(goal.x, goal.y), size * resolution)
    if reach > 0:
        heading = np.array([goal.x, goal.y]) / np.hypot(goal.x, goal.y)
        local = cell_centers(size, resolution).reshape(-1, 2)
        along = local @ heading
        across = np.abs(local[:, 0] * heading[1] - local[:, 1] * heading[0])
        raster[3] = (along >= 0) & (along <= reach) & (across <= resolution / 2)

    return raster.reshape(len(RASTER_CHANNELS), size, size)


def sense(world, n_beams=N_BEAMS, max_range=MAX_RANGE):
    """Build the robot's ``SensorFrame`` for the current world state."""
    pose = world.robot
    return SensorFrame(
        scan=raycast_lidar(pose, world, n_beams, max_range),
        raster=rasterize_view(pose, world),
        goal=pose.relative(world.goal),
    )
