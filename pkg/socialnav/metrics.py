# -*- coding: utf-8 -*-
import logging

import numpy as np
from scipy.spatial.distance import cdist

from socialnav.geometry import TimedTrack, Trajectory, resample

LOGGER = logging.getLogger(__name__)

PERSONAL_SPACE = 0.25
RESAMPLE_COUNT = 50


def _points(values):
    if isinstance(values, Trajectory):
        return values.xy

    if isinstance(values, TimedTrack):
        return values.xy

    points = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points.reshape(1, -1)

    return points[:, :2]


def mse(expected, observed):
    """Mean squared positional error between two equally long trajectories.

    Headings are ignored and waypoints are compared in order.
    """
    expected = _points(expected)
    observed = _points(observed)
    if len(expected) != len(observed):
        raise ValueError('Cannot compare trajectories of {} and {} poses'.format(
            len(expected), len(observed)))

    if not len(expected):
        raise ValueError('Cannot compare empty trajectories')

    return float(np.mean(np.sum((expected - observed) ** 2, axis=1)))


def hausdorff(first, second):
    """Symmetric Hausdorff distance between two planar point sets."""
    first = _points(first)
    second = _points(second)
    if not len(first) or not len(second):
        raise ValueError('Hausdorff distance needs two non-empty point sets')

    distances = cdist(first, second)
    return float(max(distances.min(axis=1).max(), distances.min(axis=0).max()))


def trajectory_mse(expected, observed, count=RESAMPLE_COUNT):
    """``mse`` after resampling both trajectories to ``count`` poses by arc length."""
    return mse(resample(expected, count), resample(observed, count))


def trajectory_hausdorff(expected, observed, count=RESAMPLE_COUNT):
    return hausdorff(resample(expected, count), resample(observed, count))


def psv_duration(robot, humans, radius=PERSONAL_SPACE, dt=None):
    """Seconds the robot spends strictly inside anyone's personal space.

    Args:
        robot (TimedTrack):
            Robot positions.
        humans (list[TimedTrack]):
            One track per person, sampled at the same times as ``robot``.
        radius (float):
            Personal space radius in meters. Defaults to ``0.25``.
        dt (float):
            Duration of one sample. Defaults to the step of the tracks and is
            required for single sample tracks.

    Returns:
        float:
            ``dt`` times the number of robot samples closer than ``radius``
            to at least one person.
    """
    if not len(robot.times):
        return 0.0

    if dt is None:
        dt = robot.dt
        if dt is None:
            raise ValueError('A single sample track needs an explicit dt')

    elif dt <= 0 or (robot.dt is not None and not np.isclose(robot.dt, dt, rtol=0, atol=1e-9)):
        raise ValueError('dt {} does not match the robot track'.format(dt))

    if not humans:
        return 0.0

    positions = []
    for human in humans:
        if len(human.times) > 1 and not np.isclose(human.dt, dt, rtol=0, atol=1e-9):
            raise ValueError('Human track dt {} does not match robot dt {}'.format(human.dt, dt))

        if len(human.times) != len(robot.times) or not np.isclose(human.times[0], robot.times[0]):
            raise ValueError('Human and robot tracks must cover the same time range')

        positions.append(human.xy)

    positions = np.stack(positions, axis=1)
    distances = np.linalg.norm(positions - robot.xy[:, None, :], axis=2)
    violations = int(np.count_nonzero(distances.min(axis=1) < radius))

    return dt * violations


METRICS = {
    'mse': (trajectory_mse, True),
    'hausdorff': (trajectory_hausdorff, True),
}
