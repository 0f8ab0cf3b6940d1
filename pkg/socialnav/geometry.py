# -*- coding: utf-8 -*-

"""Planar poses and trajectories.

Poses are ``(x, y, phi)`` triples in meters and radians, with ``phi`` always
wrapped into ``(-pi, pi]``. Trajectories store their poses as an ``(N, 3)``
float array so that the metric and learning code can work on them directly.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

LOGGER = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ['t', 'x', 'y', 'phi']


def wrap_angle(angle):
    """Wrap an angle into ``(-pi, pi]``.

    Args:
        angle (float):
            Angle in radians. Must be finite.

    Returns:
        float:
            The equivalent angle in ``(-pi, pi]``.
    """
    angle = float(angle)
    if not np.isfinite(angle):
        raise ValueError('Cannot wrap a non-finite angle: {}'.format(angle))

    wrapped = np.pi - np.mod(np.pi - angle, 2 * np.pi)
    if wrapped <= -np.pi:
        wrapped += 2 * np.pi

    return float(wrapped)


def wrap_angles(angles):
    """Vectorized ``wrap_angle`` over an array of angles."""
    angles = np.asarray(angles, dtype=float)
    if not np.all(np.isfinite(angles)):
        raise ValueError('Cannot wrap non-finite angles')

    wrapped = np.pi - np.mod(np.pi - angles, 2 * np.pi)
    return np.where(wrapped <= -np.pi, wrapped + 2 * np.pi, wrapped)


def rotation(phi):
    cos, sin = np.cos(phi), np.sin(phi)
    return np.array([[cos, -sin], [sin, cos]])


@dataclass
class Pose:
    """A planar pose with a wrapped heading."""

    x: float = 0.0
    y: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        self.x = float(self.x)
        self.y = float(self.y)
        self.phi = wrap_angle(self.phi)

    @property
    def xy(self):
        return np.array([self.x, self.y])

    def as_array(self):
        return np.array([self.x, self.y, self.phi])

    @classmethod
    def from_array(cls, values):
        return cls(values[0], values[1], values[2])

    def to_local(self, points):
        """Express world ``(..., 2)`` points in this pose's frame."""
        points = np.asarray(points, dtype=float)
        return (points - self.xy) @ rotation(self.phi)

    def to_world(self, points):
        """Express ``(..., 2)`` points given in this pose's frame in the world frame."""
        points = np.asarray(points, dtype=float)
        return points @ rotation(self.phi).T + self.xy

    def compose(self, local):
        """World pose of a pose ``local`` expressed in this frame."""
        local = Pose.from_array(local) if not isinstance(local, Pose) else local
        x, y = self.to_world(local.xy)
        return Pose(x, y, self.phi + local.phi)

    def relative(self, other):
        """Pose ``other`` expressed in this frame."""
        other = Pose.from_array(other) if not isinstance(other, Pose) else other
        x, y = self.to_local(other.xy)
        return Pose(x, y, other.phi - self.phi)


class Trajectory:
    """Ordered sequence of poses with optional timestamps.

    Args:
        poses (array-like):
            ``(N, 3)`` array of ``(x, y, phi)`` rows or a list of ``Pose``.
        timestamps (array-like):
            Optional strictly increasing times in seconds, one per pose.
    """

    def __init__(self, poses, timestamps=None):
        if len(poses) and isinstance(poses[0], Pose):
            poses = [pose.as_array() for pose in poses]

        poses = np.array(poses, dtype=float).reshape(-1, 3)
        if not len(poses):
            raise ValueError('A trajectory needs at least one pose')

        poses[:, 2] = wrap_angles(poses[:, 2])
        self.poses = poses

        if timestamps is not None:
            timestamps = np.asarray(timestamps, dtype=float).reshape(-1)
            if len(timestamps) != len(poses):
                raise ValueError('Got {} timestamps for {} poses'.format(
                    len(timestamps), len(poses)))

            if np.any(np.diff(timestamps) <= 0):
                raise ValueError('Trajectory timestamps must be strictly increasing')

        self.timestamps = timestamps

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, index):
        return Pose.from_array(self.poses[index])

    def __repr__(self):
        return 'Trajectory({} poses)'.format(len(self))

    @property
    def xy(self):
        return self.poses[:, :2]

    def length(self):
        return float(np.linalg.norm(np.diff(self.xy, axis=0), axis=1).sum())

    def to_world(self, origin):
        """Interpret this trajectory as expressed in ``origin``'s frame."""
        origin = Pose.from_array(origin) if not isinstance(origin, Pose) else origin
        poses = np.empty_like(self.poses)
        poses[:, :2] = origin.to_world(self.xy)
        poses[:, 2] = wrap_angles(self.poses[:, 2] + origin.phi)
        return Trajectory(poses, self.timestamps)


@dataclass
class TimedTrack:
    """Positions sampled at a fixed time step, used for time based metrics."""

    times: np.ndarray
    xy: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if len(self.times) != len(self.xy):
            raise ValueError('Got {} times for {} positions'.format(
                len(self.times), len(self.xy)))

        if len(self.times) > 1:
            steps = np.diff(self.times)
            if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=0, atol=1e-9):
                raise ValueError('TimedTrack samples must use a uniform positive step')

    @property
    def dt(self):
        if len(self.times) < 2:
            return None

        return float(self.times[1] - self.times[0])

    @classmethod
    def from_positions(cls, xy, dt, start=0.0):
        if dt <= 0:
            raise ValueError('dt must be positive, got {}'.format(dt))

        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return cls(start + dt * np.arange(len(xy)), xy)


def transform_to_initial_frame(trajectory):
    """Express every pose relative to the first one.

    The first pose becomes ``(0, 0, 0)``; the rest are rotated by ``-phi_0``
    around it and have their headings offset and wrapped.
    """
    if not isinstance(trajectory, Trajectory):
        trajectory = Trajectory(trajectory)

    origin = trajectory[0]
    poses = np.empty_like(trajectory.poses)
    poses[:, :2] = origin.to_local(trajectory.xy)
    poses[:, 2] = wrap_angles(trajectory.poses[:, 2] - origin.phi)
    poses[0] = 0.0

    return Trajectory(poses, trajectory.timestamps)


def resample(trajectory, count):
    """Resample a trajectory to ``count`` poses equally spaced in arc length.

    Headings are interpolated on the unwrapped heading sequence. A trajectory
    of zero length is repeated ``count`` times.
    """
    if count < 1:
        raise ValueError('count must be at least 1, got {}'.format(count))

    if not isinstance(trajectory, Trajectory):
        trajectory = Trajectory(trajectory)

    poses = trajectory.poses
    steps = np.linalg.norm(np.diff(poses[:, :2], axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    if arc[-1] <= 0:
        return Trajectory(np.repeat(poses[:1], count, axis=0))

    # drop repeated points so interpolation stays well defined
    keep = np.concatenate([[True], steps > 0])
    arc, poses = arc[keep], poses[keep]

    targets = np.linspace(0.0, arc[-1], count)
    headings = np.unwrap(poses[:, 2])
    resampled = np.column_stack([
        np.interp(targets, arc, poses[:, 0]),
        np.interp(targets, arc, poses[:, 1]),
        np.interp(targets, arc, headings),
    ])

    return Trajectory(resampled)


def read_trajectory(path):
    """Read a ``t x y phi`` line-delimited trajectory file."""
    data = pd.read_csv(path, sep=' ', names=TRAJECTORY_COLUMNS, comment='#')
    return Trajectory(data[['x', 'y', 'phi']].to_numpy(), data['t'].to_numpy())


def write_trajectory(trajectory, path, dt=1.0):
    """Write a trajectory as ``t x y phi`` lines.

    Trajectories without timestamps are written with a ``dt`` step.
    """
    times = trajectory.timestamps
    if times is None:
        times = dt * np.arange(len(trajectory))

    data = pd.DataFrame(trajectory.poses, columns=TRAJECTORY_COLUMNS[1:])
    data.insert(0, 't', times)
    data.to_csv(path, sep=' ', header=False, index=False, float_format='%.6f')
    LOGGER.debug('Wrote %s poses to %s', len(data), path)
