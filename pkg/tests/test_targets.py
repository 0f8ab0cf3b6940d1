"""Tests for `socialnav.targets` module."""
import numpy as np
import pytest

from socialnav.targets import (
    best_candidate, candidate_motion, label_candidates, select_family, select_split,
    split_boundaries)


def _candidates():
    expert = np.zeros((10, 3))
    candidates = np.zeros((3, 10, 3))
    candidates[0, :, 1] = 1.0
    candidates[1, :, 1] = 0.5
    candidates[2, :, 1] = -0.5
    return candidates, expert


def test_best_candidate_lowest_index_wins_ties():
    candidates, expert = _candidates()

    assert best_candidate(candidates, expert) == 1


def test_best_candidate_ignores_heading():
    candidates, expert = _candidates()
    candidates[1, :, 2] = 3.0

    assert best_candidate(candidates, expert) == 1


def test_best_candidate_shape_mismatch():
    with pytest.raises(ValueError):
        best_candidate(np.zeros((3, 9, 3)), np.zeros((10, 3)))


def test_label_candidates():
    candidates, expert = _candidates()
    flipped = candidates[::-1]

    labels = label_candidates([candidates, flipped], [expert, expert])

    np.testing.assert_array_equal(labels, [1, 0])


def _line(step):
    poses = np.zeros((10, 3))
    poses[:, 0] = step * np.arange(10)
    return poses


def _bulge(side):
    poses = _line(0.5)
    poses[:, 1] = side * 0.5 * np.sin(np.pi * np.arange(10) / 9)
    return poses


def test_candidate_motion():
    assert candidate_motion(_line(0.5)) == 'straight'
    assert candidate_motion(_line(0.25)) == 'slow'
    assert candidate_motion(_line(0.05)) == 'stop'
    assert candidate_motion(_bulge(1)) == 'left'
    assert candidate_motion(_bulge(-1)) == 'right'


def test_best_candidate_follows_the_action():
    candidates = np.stack([_line(0.5), _bulge(1), _line(0.25)])
    expert = _line(0.25)

    assert best_candidate(candidates, expert) == 2
    assert best_candidate(candidates, expert, 'slow-down') == 2
    assert best_candidate(candidates, expert, 'veer-left') == 1
    assert best_candidate(candidates, expert, 'proceed') == 0


def test_best_candidate_without_matching_motion():
    candidates = np.stack([_line(0.5), _line(0.3), _line(0.45)])
    expert = _line(0.4)

    assert best_candidate(candidates, expert, 'stop-and-yield') == 2


def test_best_candidate_unknown_action():
    candidates, expert = _candidates()

    with pytest.raises(ValueError):
        best_candidate(candidates, expert, 'dance')


def test_label_candidates_with_actions():
    candidates = np.stack([_line(0.5), _bulge(1), _line(0.25)])
    experts = [_line(0.25), _line(0.25)]

    labels = label_candidates([candidates, candidates], experts, [None, 'veer-left'])

    np.testing.assert_array_equal(labels, [2, 1])


def test_split_boundaries():
    episodes = np.repeat(np.arange(10), 2)

    boundaries = split_boundaries(episodes)

    assert boundaries == {'train': (0, 16), 'val': (16, 18), 'test': (18, 20)}


def test_split_boundaries_cut_on_episodes():
    episodes = [0, 0, 0, 1, 2, 2, 3, 4, 4, 4, 5, 6, 7, 8, 9, 9]

    boundaries = split_boundaries(episodes)

    stops = [boundaries[name][1] for name in ('train', 'val', 'test')]
    assert boundaries['train'][0] == 0
    assert boundaries['val'][0] == boundaries['train'][1]
    assert boundaries['test'][0] == boundaries['val'][1]
    assert stops[-1] == len(episodes)
    for stop in stops[:-1]:
        assert episodes[stop] != episodes[stop - 1]


def test_split_boundaries_empty():
    assert split_boundaries([]) == {'train': (0, 0), 'val': (0, 0), 'test': (0, 0)}


def test_split_boundaries_fractions():
    with pytest.raises(ValueError):
        split_boundaries([0, 1], fractions=(0.5, 0.5))


def test_select_split_and_family():
    records = [{'kind': 'a' if index % 2 else 'b', 'episode': index} for index in range(10)]
    boundaries = split_boundaries([record['episode'] for record in records])

    assert len(select_split(records, boundaries, 'train')) == 8
    assert all(record['kind'] == 'a' for record in select_family(records, 'a'))
    assert len(select_family(records, 'a', exclude=True)) == 5
