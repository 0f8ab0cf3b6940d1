"""Targets module.

This module contains functions to label candidate trajectories and to split
episode ordered records into train, validation and test ranges.
"""

import logging

import numpy as np

from socialnav.metrics import mse
from socialnav.sim.captions import DEVIATION_THRESHOLD
from socialnav.sim.expert import SPEED_MODES

LOGGER = logging.getLogger(__name__)

SPLIT_NAMES = ('train', 'val', 'test')
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)

MOTIONS = {
    'proceed': 'straight',
    'keep-right': 'right',
    'veer-left': 'left',
    'veer-right': 'right',
    'slow-down': 'slow',
    'stop-and-yield': 'stop',
}
STOP_STEP = 0.5 * (SPEED_MODES['yield'] + SPEED_MODES['slow'])
SLOW_STEP = 0.5 * (SPEED_MODES['slow'] + SPEED_MODES['normal'])


def candidate_motion(candidate):
    """Coarse motion of a robot frame trajectory.

    The mean distance between consecutive poses separates ``stop``, ``slow``
    and full speed motion. Full speed trajectories are ``left``, ``right`` or
    ``straight`` depending on their largest signed offset from the chord
    joining the first pose to the last one.
    """
    points = np.asarray(candidate, dtype=float)[:, :2]
    step = np.linalg.norm(np.diff(points, axis=0), axis=1).mean()
    if step < STOP_STEP:
        return 'stop'

    if step < SLOW_STEP:
        return 'slow'

    chord = points[-1] - points[0]
    length = np.linalg.norm(chord)
    if length < 1e-9:
        return 'straight'

    relative = points - points[0]
    offsets = (chord[0] * relative[:, 1] - chord[1] * relative[:, 0]) / length
    offset = offsets[np.argmax(np.abs(offsets))]
    if offset > DEVIATION_THRESHOLD:
        return 'left'

    if offset < -DEVIATION_THRESHOLD:
        return 'right'

    return 'straight'


def best_candidate(candidates, expert, action=None):
    """Index of the candidate closest to the expert in position MSE.

    With an ``action``, only the candidates whose motion matches it compete,
    unless none does. Ties go to the lowest index.

    Args:
        candidates (array-like):
            ``(K, T, 3)`` candidate poses.
        expert (array-like):
            ``(T, 3)`` expert poses.
        action (str):
            Optional action label of the caption.

    Returns:
        int
    """
    candidates = np.asarray(candidates, dtype=float)
    expert = np.asarray(expert, dtype=float)
    if candidates.ndim != 3 or candidates.shape[1:] != expert.shape:
        raise ValueError('Candidates {} do not match expert {}'.format(
            candidates.shape, expert.shape))

    errors = np.array([mse(expert[:, :2], candidate[:, :2]) for candidate in candidates])
    if action is not None:
        if action not in MOTIONS:
            raise ValueError('Unknown action {!r}'.format(action))

        consistent = np.array([
            candidate_motion(candidate) == MOTIONS[action] for candidate in candidates
        ])
        if consistent.any():
            errors = np.where(consistent, errors, np.inf)
        else:
            LOGGER.debug('No candidate matches %s, labeling on MSE alone', action)

    return int(np.argmin(errors))


def label_candidates(candidate_sets, experts, actions=None):
    actions = [None] * len(candidate_sets) if actions is None else actions
    return np.array([
        best_candidate(candidates, expert, action)
        for candidates, expert, action in zip(candidate_sets, experts, actions)
    ], dtype=int)


def split_boundaries(episodes, fractions=SPLIT_FRACTIONS):
    """Contiguous record ranges for each split, cut on episode boundaries.

    Args:
        episodes (array-like):
            Episode index of every record, in record order.
        fractions (tuple):
            Share of episodes in the train, validation and test splits.

    Returns:
        dict:
            ``{split: (start, stop)}`` record ranges that are disjoint and cover
            every record.
    """
    episodes = np.asarray(episodes)
    if len(fractions) != len(SPLIT_NAMES) or not np.isclose(sum(fractions), 1.0):
        raise ValueError('Split fractions must be three values adding up to 1')

    if not len(episodes):
        return {name: (0, 0) for name in SPLIT_NAMES}

    changes = np.nonzero(episodes[1:] != episodes[:-1])[0] + 1
    starts = np.concatenate([[0], changes, [len(episodes)]])
    count = len(starts) - 1

    cuts = np.round(np.cumsum(fractions)[:-1] * count).astype(int)
    edges = [0] + [int(starts[cut]) for cut in cuts] + [len(episodes)]

    boundaries = {
        name: (edges[index], edges[index + 1])
        for index, name in enumerate(SPLIT_NAMES)
    }
    LOGGER.debug('Split %s episodes into %s', count, boundaries)
    return boundaries


def select_split(records, boundaries, split):
    start, stop = boundaries[split]
    return records[start:stop]


def select_family(records, kind, exclude=False):
    """Records of scenario family ``kind``, or all the others with ``exclude``."""
    return [record for record in records if (record['kind'] == kind) != exclude]
