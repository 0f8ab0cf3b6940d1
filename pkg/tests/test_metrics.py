"""Tests for `socialnav.metrics` module."""
import numpy as np
import pytest

from socialnav.geometry import TimedTrack, Trajectory
from socialnav.metrics import (
    METRICS, hausdorff, mse, psv_duration, trajectory_hausdorff, trajectory_mse)


def _brute_force_hausdorff(first, second):
    forward = max(min(np.linalg.norm(a - b) for b in second) for a in first)
    backward = max(min(np.linalg.norm(a - b) for a in first) for b in second)
    return max(forward, backward)


def test_mse():
    expected = [[0, 0], [1, 0]]
    observed = [[0, 1], [1, 1]]

    assert mse(expected, observed) == pytest.approx(1.0)


def test_mse_ignores_headings():
    expected = np.array([[0, 0, 0.0], [1, 0, 0.0]])
    observed = np.array([[0, 0, 3.0], [1, 0, -2.0]])

    assert mse(expected, observed) == 0.0


def test_mse_length_mismatch():
    with pytest.raises(ValueError):
        mse(np.zeros((3, 2)), np.zeros((4, 2)))

    with pytest.raises(ValueError):
        mse(np.zeros((0, 2)), np.zeros((0, 2)))


def test_hausdorff_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        first = rng.normal(size=(rng.integers(1, 21), 2))
        second = rng.normal(size=(rng.integers(1, 21), 2))

        assert abs(hausdorff(first, second) - _brute_force_hausdorff(first, second)) <= 1e-9


def test_hausdorff_symmetric_and_zero_on_itself():
    points = np.array([[0, 0], [1, 2], [3, 1]], dtype=float)

    assert hausdorff(points, points) == 0.0
    assert hausdorff(points, points[:1]) == hausdorff(points[:1], points)


def test_hausdorff_empty():
    with pytest.raises(ValueError):
        hausdorff(np.zeros((0, 2)), np.zeros((1, 2)))


def test_trajectory_metrics_resample_by_arc_length():
    expected = Trajectory([[0, 0, 0], [10, 0, 0]])
    observed = Trajectory([[0, 0, 0], [2, 0, 0], [3, 0, 0], [10, 0, 0]])

    assert trajectory_mse(expected, observed) == pytest.approx(0.0, abs=1e-12)
    assert trajectory_hausdorff(expected, observed) == pytest.approx(0.0, abs=1e-12)


def test_psv_duration_counts_steps():
    times = np.arange(5) * 0.1
    robot = TimedTrack(times, [[0, 0], [0.1, 0], [0.2, 0], [0.3, 0], [0.4, 0]])
    human = TimedTrack(times, [[0.5, 0]] * 5)

    # distances 0.5, 0.4, 0.3, 0.2, 0.1: two samples are inside 0.25
    assert psv_duration(robot, [human]) == pytest.approx(0.2)


def test_psv_duration_matches_brute_force():
    rng = np.random.default_rng(3)
    times = np.arange(30) * 0.1
    robot = TimedTrack(times, rng.uniform(0, 2, size=(30, 2)))
    humans = [TimedTrack(times, rng.uniform(0, 2, size=(30, 2))) for _ in range(3)]

    count = 0
    for step in range(30):
        if any(np.linalg.norm(robot.xy[step] - human.xy[step]) < 0.25 for human in humans):
            count += 1

    assert psv_duration(robot, humans) == pytest.approx(0.1 * count)


def test_psv_duration_without_humans():
    robot = TimedTrack.from_positions(np.zeros((3, 2)), 0.1)

    assert psv_duration(robot, []) == 0.0


def test_psv_duration_mismatched_dt():
    robot = TimedTrack.from_positions(np.zeros((3, 2)), 0.1)
    human = TimedTrack.from_positions(np.zeros((3, 2)), 0.2)

    with pytest.raises(ValueError):
        psv_duration(robot, [human])


def test_metrics_registry():
    assert set(METRICS) == {'mse', 'hausdorff'}
    assert all(is_cost for _, is_cost in METRICS.values())


def test_psv_duration_single_sample():
    robot = TimedTrack([2.0], [[0, 0]])
    inside = TimedTrack([2.0], [[0.1, 0]])
    outside = TimedTrack([2.0], [[1.0, 0]])

    assert psv_duration(robot, [outside, inside], dt=0.1) == pytest.approx(0.1)
    assert psv_duration(robot, [outside], dt=0.1) == 0.0


def test_psv_duration_single_sample_needs_dt():
    robot = TimedTrack([0.0], [[0, 0]])
    human = TimedTrack([0.0], [[0.1, 0]])

    with pytest.raises(ValueError):
        psv_duration(robot, [human])


def test_psv_duration_explicit_dt_must_match():
    robot = TimedTrack.from_positions(np.zeros((3, 2)), 0.1)
    human = TimedTrack.from_positions(np.zeros((3, 2)), 0.1)

    assert psv_duration(robot, [human], dt=0.1) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        psv_duration(robot, [human], dt=0.2)
