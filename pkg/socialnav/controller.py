# -*- coding: utf-8 -*-

"""PID tracking of a planned trajectory."""

import logging

import numpy as np

from socialnav.geometry import Trajectory, wrap_angle

LOGGER = logging.getLogger(__name__)


class PidController:
    """Two channel PID controller producing ``(v, omega)`` commands.

    The target is the first waypoint at least ``lookahead`` meters away from
    the robot, searching forward from the waypoint nearest to it, or the last
    waypoint when none is far enough. The linear error is the distance to the
    target projected on the robot heading and the angular error is the wrapped
    bearing to the target.

    Args:
        kp (tuple):
            Proportional gains ``(linear, angular)``.
        ki (tuple):
            Integral gains ``(linear, angular)``.
        kd (tuple):
            Derivative gains ``(linear, angular)``.
        v_max (float):
            Linear velocity limit in m/s. Reverse motion is not allowed.
        omega_max (float):
            Angular velocity limit in rad/s.
        lookahead (float):
            Minimum distance to the tracked waypoint, in meters.
        integral_clamp (float):
            Bound on each integral accumulator.
        goal_tolerance (float):
            Distance to the final waypoint below which the robot stops.
    """

    def __init__(self, kp=(0.8, 1.5), ki=(0.0, 0.0), kd=(0.1, 0.2), v_max=1.0, omega_max=1.5,
                 lookahead=0.4, integral_clamp=1.0, goal_tolerance=0.05):
        if v_max <= 0 or omega_max <= 0 or integral_clamp <= 0:
            raise ValueError('Controller limits must be positive')

        self.kp = np.asarray(kp, dtype=float)
        self.ki = np.asarray(ki, dtype=float)
        self.kd = np.asarray(kd, dtype=float)
        self.v_max = float(v_max)
        self.omega_max = float(omega_max)
        self.lookahead = float(lookahead)
        self.integral_clamp = float(integral_clamp)
        self.goal_tolerance = float(goal_tolerance)
        self.reset()

    def reset(self):
        """Zero the integral accumulators and forget the previous errors."""
        self.integral = np.zeros(2)
        self.previous = None
        return self

    def target(self, pose, waypoints):
        distances = np.linalg.norm(waypoints - pose.xy, axis=1)
        nearest = int(np.argmin(distances))
        ahead = np.nonzero(distances[nearest:] >= self.lookahead)[0]
        if len(ahead):
            return nearest + int(ahead[0])

        return len(waypoints) - 1

    def step(self, pose, trajectory, dt, speed_limit=None):
        """Compute the command that tracks ``trajectory`` from ``pose``.

        Args:
            pose (Pose):
                Current robot pose in the trajectory's frame.
            trajectory (Trajectory or array-like):
                Waypoints to follow.
            dt (float):
                Control period in seconds.
            speed_limit (float):
                Optional extra cap on the linear velocity.

        Returns:
            tuple:
                ``(v, omega)``.
        """
        if dt <= 0:
            raise ValueError('dt must be positive, got {}'.format(dt))

        if not isinstance(trajectory, Trajectory):
            trajectory = Trajectory(trajectory)

        waypoints = trajectory.xy
        index = self.target(pose, waypoints)
        delta = waypoints[index] - pose.xy
        distance = float(np.hypot(*delta))
        if index == len(waypoints) - 1 and distance < self.goal_tolerance:
            self.previous = np.zeros(2)
            return 0.0, 0.0

        errors = np.array([
            delta[0] * np.cos(pose.phi) + delta[1] * np.sin(pose.phi),
            wrap_angle(np.arctan2(delta[1], delta[0]) - pose.phi),
        ])

        self.integral = np.clip(self.integral + errors * dt,
                                -self.integral_clamp, self.integral_clamp)
        derivative = np.zeros(2) if self.previous is None else (errors - self.previous) / dt
        self.previous = errors

        command = self.kp * errors + self.ki * self.integral + self.kd * derivative
        v_max = self.v_max if speed_limit is None else min(self.v_max, speed_limit)
        v = float(np.clip(command[0], 0.0, v_max))
        omega = float(np.clip(command[1], -self.omega_max, self.omega_max))

        return v, omega
