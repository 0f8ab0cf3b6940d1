# -*- coding: utf-8 -*-

"""Seeded generators for the four social navigation scenario families."""

import logging

import numpy as np

from socialnav.geometry import Pose
from socialnav.sim.world import Group, Human, World

LOGGER = logging.getLogger(__name__)

SCENARIOS = (
    'narrow_hallway',
    'blind_corner',
    'static_groups_dynamic',
    'dynamic_groups_dynamic',
)

CORRIDOR_WIDTH = 3.0
CORNER_ARM = 10.0
ROOM = (-2.0, 12.0, -5.0, 5.0)


def _box(x_min, x_max, y_min, y_max):
    return [
        (x_min, y_min, x_max, y_min),
        (x_max, y_min, x_max, y_max),
        (x_max, y_max, x_min, y_max),
        (x_min, y_max, x_min, y_min),
    ]


def _narrow_hallway(rng, dt, seed):
    half = CORRIDOR_WIDTH / 2
    walls = _box(-2.0, 14.0, -half, half)
    robot = Pose(0.0, rng.uniform(-0.2, 0.2), 0.0)
    goal = Pose(12.0, 0.0, 0.0)

    # people walk towards the robot, keeping to their own right
    humans = []
    for start_x in (rng.uniform(6.0, 9.0), rng.uniform(11.0, 13.5)):
        lane = rng.uniform(0.15, 0.45)
        humans.append(Human(
            position=(start_x, lane),
            waypoints=[(-1.5, lane)],
            speed=rng.uniform(0.7, 1.1),
        ))

    return World(walls, humans, robot, goal, dt=dt, kind='narrow_hallway', seed=seed)


def _blind_corner(rng, dt, seed):
    half = CORRIDOR_WIDTH / 2
    inner_x = 6.0 - half
    outer_x = 6.0 + half
    walls = [
        (-2.0, -half, outer_x, -half),
        (outer_x, -half, outer_x, CORNER_ARM),
        (outer_x, CORNER_ARM, inner_x, CORNER_ARM),
        (inner_x, CORNER_ARM, inner_x, half),
        (inner_x, half, -2.0, half),
        (-2.0, half, -2.0, -half),
    ]
    robot = Pose(0.0, rng.uniform(-0.2, 0.2), 0.0)
    goal = Pose(6.0, 8.0, np.pi / 2)

    lane = rng.uniform(0.15, 0.45)
    human = Human(
        position=(6.0 - lane, rng.uniform(6.0, 8.5)),
        waypoints=[(6.0 - lane, lane), (-1.5, lane)],
        speed=rng.uniform(0.6, 1.0),
    )

    return World(walls, [human], robot, goal, dt=dt, kind='blind_corner',
                 corners=[(inner_x, half)], seed=seed)


def _group_members(rng, center, label, count, spread=0.5):
    offsets = rng.uniform(0, 2 * np.pi) + 2 * np.pi * np.arange(count) / count
    members = []
    for angle in offsets:
        position = np.asarray(center) + spread * np.array([np.cos(angle), np.sin(angle)])
        members.append(Human(position=position, waypoints=[position], speed=0.0, group=label))

    return members


def _crossing_human(rng, x_range, speed_range):
    x = rng.uniform(*x_range)
    bottom, top = ROOM[2] + 1.0, ROOM[3] - 1.0
    start_y = rng.choice([bottom, top])
    end_y = top if start_y == bottom else bottom
    return Human(
        position=(x, start_y),
        waypoints=[(x, end_y), (x, start_y)],
        speed=rng.uniform(*speed_range),
        loop=True,
    )


def _static_groups_dynamic(rng, dt, seed):
    walls = _box(*ROOM)
    robot = Pose(0.0, rng.uniform(-0.3, 0.3), 0.0)
    goal = Pose(10.0, 0.0, 0.0)

    humans, groups = [], []
    centers = [(4.0, rng.uniform(-0.4, 0.4)), (7.5, rng.choice([-2.5, 2.5]))]
    for number, center in enumerate(centers):
        label = 'standing_{}'.format(number)
        members = _group_members(rng, center, label, int(rng.integers(2, 4)))
        groups.append(Group(label, list(range(len(humans), len(humans) + len(members)))))
        humans.extend(members)

    for x_range in ((2.0, 3.0), (5.5, 6.5), (8.5, 9.5)):
        humans.append(_crossing_human(rng, x_range, (0.5, 1.0)))

    return World(walls, humans, robot, goal, groups=groups, dt=dt,
                 kind='static_groups_dynamic', seed=seed)


def _walking_group(rng, start, end, label, speed):
    start, end = np.asarray(start), np.asarray(end)
    direction = (end - start) / np.linalg.norm(end - start)
    side = np.array([-direction[1], direction[0]]) * 0.35
    return [
        Human(position=start + offset, waypoints=[end + offset, start + offset],
              speed=speed, group=label, loop=True)
        for offset in (side, -side)
    ]


def _dynamic_groups_dynamic(rng, dt, seed):
    walls = _box(*ROOM)
    robot = Pose(0.0, rng.uniform(-0.3, 0.3), 0.0)
    goal = Pose(10.0, 0.0, 0.0)

    lane = rng.uniform(0.8, 1.4)
    routes = [
        ((rng.uniform(8.0, 10.5), lane), (-1.0, lane)),
        ((rng.uniform(4.5, 6.5), ROOM[2] + 1.0), (rng.uniform(4.5, 6.5), ROOM[3] - 1.0)),
    ]

    humans, groups = [], []
    for number, (start, end) in enumerate(routes):
        label = 'walking_{}'.format(number)
        members = _walking_group(rng, start, end, label, rng.uniform(0.5, 0.9))
        groups.append(Group(label, list(range(len(humans), len(humans) + 2)), static=False))
        humans.extend(members)

    for x_range in ((2.5, 3.5), (7.5, 8.5)):
        humans.append(_crossing_human(rng, x_range, (0.5, 1.0)))

    return World(walls, humans, robot, goal, groups=groups, dt=dt,
                 kind='dynamic_groups_dynamic', seed=seed)


GENERATORS = {
    'narrow_hallway': _narrow_hallway,
    'blind_corner': _blind_corner,
    'static_groups_dynamic': _static_groups_dynamic,
    'dynamic_groups_dynamic': _dynamic_groups_dynamic,
}


def make_scenario(kind, seed, dt=0.1):
    """Build a seeded world of the given scenario family.

    Args:
        kind (str):
            One of ``SCENARIOS``.
        seed (int):
            Random seed; the same seed always yields the same world.
        dt (float):
            Simulation step in seconds.

    Returns:
        World
    """
    if kind not in GENERATORS:
        raise ValueError('Unknown scenario {!r}, expected one of {}'.format(kind, SCENARIOS))

    rng = np.random.default_rng(seed)
    world = GENERATORS[kind](rng, dt, seed)
    LOGGER.debug('Built %s world with seed %s and %s people', kind, seed, len(world.humans))

    return world
