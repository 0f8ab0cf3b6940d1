"""Tests for `socialnav.controller` module."""
from unittest import TestCase

import numpy as np
import pytest

from socialnav.controller import PidController
from socialnav.geometry import Pose, Trajectory


def _straight(length=10):
    return Trajectory(np.column_stack([np.arange(length), np.zeros(length), np.zeros(length)]))


class TestPidController(TestCase):

    def setUp(self):
        self.controller = PidController()

    def test_tracks_waypoint_ahead(self):
        v, omega = self.controller.step(Pose(), _straight(), 0.1)

        assert v == pytest.approx(0.8)
        assert omega == pytest.approx(0.0)

    def test_speed_limit(self):
        v, _ = self.controller.step(Pose(), _straight(), 0.1, speed_limit=0.3)

        assert v == pytest.approx(0.3)

    def test_no_reverse_motion(self):
        behind = Trajectory([[-1.0, 0.0, 0.0], [-2.0, 0.0, 0.0]])

        v, omega = self.controller.step(Pose(), behind, 0.1)

        assert v == 0.0
        assert abs(omega) == pytest.approx(1.5)

    def test_turns_towards_the_target(self):
        left = Trajectory([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

        _, omega = self.controller.step(Pose(), left, 0.1)

        assert omega > 0

    def test_stops_at_the_goal(self):
        assert self.controller.step(Pose(9.0, 0.0, 0.0), _straight(), 0.1) == (0.0, 0.0)

    def test_accepts_arrays(self):
        poses = np.column_stack([np.arange(3.0), np.zeros(3), np.zeros(3)])

        assert self.controller.step(Pose(), poses, 0.1)[0] > 0

    def test_integral_is_clamped(self):
        controller = PidController(ki=(1.0, 1.0), integral_clamp=0.2)
        for _ in range(50):
            controller.step(Pose(), _straight(), 0.1)

        np.testing.assert_array_less(np.abs(controller.integral), 0.2 + 1e-12)

        controller.reset()
        assert not controller.integral.any()
        assert controller.previous is None

    def test_invalid_dt(self):
        with pytest.raises(ValueError):
            self.controller.step(Pose(), _straight(), 0.0)


def test_invalid_limits():
    with pytest.raises(ValueError):
        PidController(v_max=0.0)
