# -*- coding: utf-8 -*-

"""Template caption oracle.

Captions describe the scenario, the people and objects around the robot and
the navigation action the expert takes. The action is derived from the
expert's own plan, so labels and demonstrated behaviour agree.
"""

import logging
from dataclasses import dataclass

import numpy as np

from socialnav.sim.expert import assess_scene, lateral_deviation, plan_expert

LOGGER = logging.getLogger(__name__)

ACTIONS = ('proceed', 'keep-right', 'veer-left', 'veer-right', 'slow-down', 'stop-and-yield')
DEVIATION_THRESHOLD = 0.25
VIEW_RANGE = 8.0
SHORT_LIMIT = 20

SCENE_PHRASES = {
    'narrow_hallway': 'a narrow hallway',
    'blind_corner': 'a hallway leading to a blind corner',
    'static_groups_dynamic': 'an open hall with standing groups',
    'dynamic_groups_dynamic': 'an open hall with walking groups',
    None: 'an open space',
}
ACTION_PHRASES = {
    'proceed': 'the path is clear so the robot should proceed towards the goal',
    'keep-right': 'the robot should keep right and pass the oncoming person on the right',
    'veer-left': 'the robot should veer left to go around the people',
    'veer-right': 'the robot should veer right to go around the people',
    'slow-down': 'the robot should slow down because the view ahead is blocked',
    'stop-and-yield': 'the robot should stop and yield to the person in front',
}
ACTION_WORDS = {
    'proceed': 'proceed',
    'keep-right': 'keep right',
    'veer-left': 'veer left',
    'veer-right': 'veer right',
    'slow-down': 'slow down',
    'stop-and-yield': 'stop and yield',
}
SHORT_SCENES = {
    'narrow_hallway': 'narrow hallway',
    'blind_corner': 'blind corner',
    'static_groups_dynamic': 'standing groups',
    'dynamic_groups_dynamic': 'walking groups',
    None: 'open space',
}
NUMBERS = ('no', 'one', 'two', 'three', 'four', 'five', 'six', 'seven', 'eight', 'many')
DISTANCES = ('very close', 'nearby', 'far away')
SIDES = ('ahead', 'on the left', 'on the right', 'behind')
MOTIONS = ('standing still', 'walking towards the robot', 'walking away', 'crossing the path')


class CaptionError(RuntimeError):
    """Raised when the oracle cannot describe a world."""


@dataclass
class CaptionPair:
    """Long and short description of a scene plus its action label."""

    long_text: str
    short_text: str
    action: str

    def __post_init__(self):
        if not self.long_text.strip() or not self.short_text.strip():
            raise ValueError('Caption texts must not be empty')

        if self.action not in ACTIONS:
            raise ValueError('Unknown action {!r}'.format(self.action))


def classify_maneuver(world, plan=None):
    """Action label of the maneuver the expert performs in ``world``."""
    plan = plan or plan_expert(world)
    if plan.stopped or plan.speed_mode == 'yield':
        return 'stop-and-yield'

    if plan.speed_mode == 'slow':
        return 'slow-down'

    nominal = plan_expert(world, social=False)
    deviation = lateral_deviation(plan.trajectory, nominal.trajectory)
    if deviation > DEVIATION_THRESHOLD:
        return 'veer-left'

    if deviation < -DEVIATION_THRESHOLD:
        return 'keep-right' if assess_scene(world).oncoming else 'veer-right'

    return 'proceed'


def _count(number):
    return NUMBERS[min(number, len(NUMBERS) - 1)]


def _distance_word(distance):
    if distance < 2.0:
        return DISTANCES[0]

    if distance < 4.0:
        return DISTANCES[1]

    return DISTANCES[2]


def _side_word(forward, left):
    bearing = np.degrees(np.arctan2(left, forward))
    if abs(bearing) <= 30:
        return SIDES[0]

    if abs(bearing) >= 120:
        return SIDES[3]

    return SIDES[1] if bearing > 0 else SIDES[2]


def _motion_word(human, pose):
    velocity = human.intended_velocity
    if np.linalg.norm(velocity) < 0.05:
        return MOTIONS[0]

    heading = np.array([np.cos(pose.phi), np.sin(pose.phi)])
    along = velocity @ heading / np.linalg.norm(velocity)
    if along < -0.5:
        return MOTIONS[1]

    if along > 0.5:
        return MOTIONS[2]

    return MOTIONS[3]


def _people_sentence(world):
    pose = world.robot
    visible = []
    for human in world.humans:
        forward, left = pose.to_local(human.position)
        distance = float(np.hypot(forward, left))
        if distance <= VIEW_RANGE:
            visible.append((distance, forward, left, human))

    if not visible:
        return 'there are no people in view'

    visible.sort(key=lambda item: item[0])
    distance, forward, left, nearest = visible[0]
    sentence = 'there {} {} {} in view , the nearest one is {} {} and {}'.format(
        'is' if len(visible) == 1 else 'are',
        _count(len(visible)),
        'person' if len(visible) == 1 else 'people',
        _distance_word(distance),
        _side_word(forward, left),
        _motion_word(nearest, pose),
    )

    groups = [group for group in world.groups
              if np.min(np.linalg.norm(world.group_positions(group) - pose.xy, axis=1))
              <= VIEW_RANGE]
    if groups:
        standing = sum(group.static for group in groups)
        walking = len(groups) - standing
        parts = []
        if standing:
            parts.append('{} standing {}'.format(_count(standing),
                                                 'group' if standing == 1 else 'groups'))
        if walking:
            parts.append('{} walking {}'.format(_count(walking),
                                                'group' if walking == 1 else 'groups'))

        sentence += ' , with {} talking together'.format(' and '.join(parts))

    return sentence


def _objects_sentence(world):
    assessment = assess_scene(world)
    if assessment.corner_ahead:
        return 'walls surround the robot and a corner ahead hides the way'

    if world.kind == 'narrow_hallway':
        return 'walls run close on both sides of the robot'

    if len(world.walls):
        return 'walls enclose the area around the robot'

    return 'there are no walls nearby'


def caption_oracle(world):
    """Describe ``world`` with a long caption, a short caption and an action label.

    Returns:
        CaptionPair

    Raises:
        CaptionError:
            If the expert cannot be queried on this world.
    """
    try:
        action = classify_maneuver(world)
    except (ValueError, IndexError) as error:
        raise CaptionError('Cannot caption world at t={}: {}'.format(world.time, error))

    scene = SCENE_PHRASES.get(world.kind, SCENE_PHRASES[None])
    long_text = 'the robot is in {} . {} . {} . {} .'.format(
        scene, _people_sentence(world), _objects_sentence(world), ACTION_PHRASES[action])

    people = sum(
        np.linalg.norm(human.position - world.robot.xy) <= VIEW_RANGE for human in world.humans)
    short_text = '{} , {} {} , {}'.format(
        ACTION_WORDS[action],
        _count(int(people)),
        'person' if people == 1 else 'people',
        SHORT_SCENES.get(world.kind, SHORT_SCENES[None]),
    )

    return CaptionPair(long_text, short_text, action)


def caption_vocabulary():
    """Every word the templates can produce."""
    texts = list(SCENE_PHRASES.values()) + list(ACTION_PHRASES.values())
    texts += list(ACTION_WORDS.values()) + list(SHORT_SCENES.values())
    texts += list(NUMBERS) + list(DISTANCES) + list(SIDES) + list(MOTIONS)
    texts += [
        'the robot is in', 'there is are person people in view , the nearest one and',
        'with standing walking group groups talking together',
        'walls surround the robot and a corner ahead hides the way',
        'walls run close on both sides of the robot',
        'walls enclose the area around the robot',
        'there are no walls nearby', 'there are no people in view', '.',
    ]
    words = set()
    for text in texts:
        words.update(text.split())

    return sorted(words)
