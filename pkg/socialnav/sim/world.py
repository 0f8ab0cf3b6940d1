# -*- coding: utf-8 -*-

"""Kinematic 2D world with walls, scripted pedestrians and a unicycle robot."""

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from socialnav.geometry import Pose, wrap_angle

LOGGER = logging.getLogger(__name__)

HUMAN_RADIUS = 0.3
ROBOT_RADIUS = 0.3
MAX_HUMAN_SPEED = 2.0


def segment_distances(points, walls):
    """Distance from each point to each wall segment.

    Args:
        points (numpy.ndarray):
            ``(N, 2)`` points.
        walls (numpy.ndarray):
            ``(M, 4)`` segments as ``x1, y1, x2, y2`` rows.

    Returns:
        numpy.ndarray:
            ``(N, M)`` distances.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    walls = np.asarray(walls, dtype=float).reshape(-1, 4)
    if not len(walls):
        return np.full((len(points), 0), np.inf)

    start = walls[None, :, :2]
    direction = walls[None, :, 2:] - start
    length2 = np.maximum(np.sum(direction ** 2, axis=2), 1e-12)
    offset = points[:, None, :] - start
    along = np.clip(np.sum(offset * direction, axis=2) / length2, 0.0, 1.0)
    closest = start + along[..., None] * direction

    return np.linalg.norm(points[:, None, :] - closest, axis=2)


@dataclass
class Human:
    """A pedestrian following its waypoints at constant speed.

    Waypoints are visited in order; with ``loop`` the script restarts from the
    first waypoint, otherwise the human stops at the last one.
    """

    position: np.ndarray
    waypoints: np.ndarray
    speed: float = 1.0
    radius: float = HUMAN_RADIUS
    group: str = None
    loop: bool = False
    target: int = 0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if not 0 <= self.speed <= MAX_HUMAN_SPEED:
            raise ValueError('Human speed must be in [0, {}], got {}'.format(
                MAX_HUMAN_SPEED, self.speed))

    @property
    def moving(self):
        return self.speed > 0 and self.target < len(self.waypoints)

    @property
    def intended_velocity(self):
        """Velocity towards the current waypoint, zero once the script is done."""
        if not self.moving:
            return np.zeros(2)

        delta = self.waypoints[self.target] - self.position
        distance = np.linalg.norm(delta)
        if distance < 1e-9:
            return np.zeros(2)

        return delta / distance * self.speed

    def step(self, dt):
        remaining = self.speed * dt
        start = self.position.copy()
        while remaining > 1e-12 and self.target < len(self.waypoints):
            delta = self.waypoints[self.target] - self.position
            distance = np.linalg.norm(delta)
            if distance <= remaining:
                self.position = self.waypoints[self.target].copy()
                remaining -= distance
                self.target += 1
                if self.loop and self.target == len(self.waypoints):
                    self.target = 0

                if distance < 1e-12 and len(self.waypoints) == 1:
                    break
            else:
                self.position = self.position + delta * (remaining / distance)
                remaining = 0.0

        self.velocity = (self.position - start) / dt


@dataclass
class Group:
    label: str
    members: list
    static: bool = True


class World:
    """Single-owner simulation state.

    Args:
        walls (array-like):
            ``(M, 4)`` wall segments.
        humans (list[Human]):
            Pedestrians.
        robot (Pose):
            Initial robot pose.
        goal (Pose):
            Goal pose in the world frame.
        groups (list[Group]):
            Labelled sets of human indices.
        dt (float):
            Simulation step in seconds. Defaults to ``0.1``.
        kind (str):
            Scenario family that produced this world, if any.
        corners (array-like):
            Convex wall corners that hide the space behind them.
        seed (int):
            Seed used to generate the world.
    """

    def __init__(self, walls, humans, robot, goal, groups=None, dt=0.1, kind=None,
                 corners=None, seed=None):
        if dt <= 0:
            raise ValueError('dt must be positive, got {}'.format(dt))

        self.walls = np.asarray(walls, dtype=float).reshape(-1, 4)
        self.humans = list(humans)
        self.robot = robot if isinstance(robot, Pose) else Pose.from_array(robot)
        self.goal = goal if isinstance(goal, Pose) else Pose.from_array(goal)
        self.groups = list(groups or [])
        self.dt = float(dt)
        self.kind = kind
        self.corners = np.asarray(corners if corners is not None else [], dtype=float)
        self.corners = self.corners.reshape(-1, 2)
        self.seed = seed
        self.time = 0.0
        self.command = (0.0, 0.0)
        self.wall_collision = False
        self.human_collision = False

        for group in self.groups:
            labels = {self.humans[index].group for index in group.members}
            if labels != {group.label}:
                raise ValueError('Members of group {} carry labels {}'.format(
                    group.label, labels))

    def copy(self):
        return copy.deepcopy(self)

    @property
    def human_positions(self):
        if not self.humans:
            return np.zeros((0, 2))

        return np.array([human.position for human in self.humans])

    def group_positions(self, group):
        return np.array([self.humans[index].position for index in group.members])

    def without_people(self):
        """Copy of this world with every human and group removed."""
        empty = self.copy()
        empty.humans = []
        empty.groups = []
        return empty

    def check_collisions(self):
        position = self.robot.xy[None]
        wall = False
        if len(self.walls):
            wall = bool(segment_distances(position, self.walls).min() < ROBOT_RADIUS)

        human = False
        if self.humans:
            gaps = np.linalg.norm(self.human_positions - position, axis=1)
            radii = np.array([h.radius for h in self.humans]) + ROBOT_RADIUS
            human = bool(np.any(gaps < radii))

        return wall, human

    def step(self, command):
        """Advance one ``dt``: unicycle robot update, then the pedestrians.

        Args:
            command (tuple):
                Linear and angular velocity ``(v, omega)``.

        Returns:
            World:
                ``self``, advanced in place.
        """
        v, omega = (float(value) for value in command)
        if not (np.isfinite(v) and np.isfinite(omega)):
            raise ValueError('Non-finite command {}'.format(command))

        robot = self.robot
        self.robot = Pose(
            robot.x + v * np.cos(robot.phi) * self.dt,
            robot.y + v * np.sin(robot.phi) * self.dt,
            wrap_angle(robot.phi + omega * self.dt),
        )
        for human in self.humans:
            human.step(self.dt)

        self.time += self.dt
        self.command = (v, omega)

        wall, human = self.check_collisions()
        if wall and not self.wall_collision:
            LOGGER.debug('Robot hit a wall at t=%.1f', self.time)

        self.wall_collision |= wall
        self.human_collision |= human

        return self

    def predict_humans(self, horizon, step=0.5):
        """Predicted human positions over ``horizon`` seconds.

        Returns:
            tuple:
                ``(times, positions)`` with ``positions`` of shape ``(S, H, 2)``.
        """
        clone = [copy.deepcopy(human) for human in self.humans]
        times = np.arange(0.0, horizon + 1e-9, step)
        positions = np.zeros((len(times), len(clone), 2))
        for index in range(len(times)):
            if index:
                for human in clone:
                    human.step(step)

            for column, human in enumerate(clone):
                positions[index, column] = human.position

        return times, positions

    def goal_distance(self):
        return float(np.linalg.norm(self.goal.xy - self.robot.xy))
