# -*- coding: utf-8 -*-

"""Closed loop episodes: replan periodically, track the plan, step the world."""

import logging
from dataclasses import dataclass, field

import numpy as np

from socialnav.controller import PidController
from socialnav.geometry import TimedTrack, Trajectory
from socialnav.sim.expert import plan_expert

LOGGER = logging.getLogger(__name__)

GOAL_RADIUS = 0.3


@dataclass
class EpisodeTrace:
    """Everything recorded while running one episode.

    Attributes:
        times (numpy.ndarray):
            ``(N + 1,)`` sample times, starting at the initial state.
        robot (numpy.ndarray):
            ``(N + 1, 3)`` robot poses.
        humans (numpy.ndarray):
            ``(N + 1, H, 2)`` human positions.
        commands (numpy.ndarray):
            ``(N, 2)`` commands applied between samples.
        plans (list):
            ``(time, Trajectory)`` pairs of world frame plans.
    """

    times: np.ndarray
    robot: np.ndarray
    humans: np.ndarray
    commands: np.ndarray
    plans: list = field(default_factory=list)
    reached_goal: bool = False
    wall_collision: bool = False
    human_collision: bool = False

    def trajectory(self):
        return Trajectory(self.robot, self.times)

    def robot_track(self):
        return TimedTrack(self.times, self.robot[:, :2])

    def human_tracks(self):
        return [
            TimedTrack(self.times, self.humans[:, index])
            for index in range(self.humans.shape[1])
        ]

    def command_log(self):
        return np.column_stack([self.times[:-1], self.commands])


def _speed_limit(trajectory):
    if trajectory.timestamps is None:
        return None

    duration = trajectory.timestamps[-1] - trajectory.timestamps[0]
    return trajectory.length() / duration if duration > 0 else None


def expert_planner(world):
    return plan_expert(world).trajectory


def drive(world, planner=expert_planner, controller=None, max_steps=600, replan_every=10,
          on_step=None, stop_on_wall=True):
    """Run ``world`` in closed loop until the goal, a wall hit or ``max_steps``.

    Args:
        world (World):
            World to advance in place.
        planner (callable):
            ``planner(world)`` returning a robot frame ``Trajectory``.
        controller (PidController):
            Tracking controller. A default one is built when omitted.
        max_steps (int):
            Maximum number of simulation steps.
        replan_every (int):
            Simulation steps between two planner calls.
        on_step (callable):
            Optional ``on_step(world, step)`` hook called before each step.

    Returns:
        EpisodeTrace
    """
    controller = controller or PidController()
    controller.reset()

    times = [world.time]
    robot = [world.robot.as_array()]
    humans = [world.human_positions.copy()]
    commands = []
    plans = []
    plan = None
    speed_limit = None

    for step in range(max_steps):
        if world.goal_distance() < GOAL_RADIUS:
            break

        if on_step is not None:
            on_step(world, step)

        if step % replan_every == 0:
            local = planner(world)
            plan = local.to_world(world.robot)
            plans.append((world.time, plan))
            speed_limit = _speed_limit(local)
            controller.reset()

        command = controller.step(world.robot, plan, world.dt, speed_limit)
        world.step(command)

        times.append(world.time)
        robot.append(world.robot.as_array())
        humans.append(world.human_positions.copy())
        commands.append(command)

        if stop_on_wall and world.wall_collision:
            LOGGER.info('Episode stopped after a wall collision at t=%.1f', world.time)
            break

    return EpisodeTrace(
        times=np.round(np.array(times), 9),
        robot=np.array(robot),
        humans=np.array(humans).reshape(len(times), len(world.humans), 2),
        commands=np.array(commands).reshape(-1, 2),
        plans=plans,
        reached_goal=world.goal_distance() < GOAL_RADIUS,
        wall_collision=world.wall_collision,
        human_collision=world.human_collision,
    )
