"""Tests for `socialnav.pipeline` module."""
import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from socialnav.pipeline import SocialNavPipeline
from socialnav.sim.scenarios import make_scenario


def test_plan_requires_components(make_frame):
    with pytest.raises(NotFittedError):
        SocialNavPipeline().plan(make_frame())


def test_plan_requires_trained_selector(pipeline, make_frame):
    pipeline.selector.fitted = False

    assert not pipeline.fitted
    with pytest.raises(NotFittedError):
        pipeline.plan(make_frame())


def test_plan_selects_best_logit(pipeline, make_frame):
    selection = pipeline.plan(make_frame(), time=2.0)

    assert selection.candidates.shape == (5, 10, 3)
    assert not selection.fallback
    assert selection.index == int(np.argmax(selection.logits))
    assert selection.action in ('proceed', 'slow-down', 'veer-left')
    assert -1.0 - 1e-6 <= selection.score <= 1.0 + 1e-6
    assert len(selection.trajectory) == 10
    np.testing.assert_array_equal(selection.trajectory.timestamps, np.arange(10.0))


def test_low_retrieval_score_falls_back(make_pipeline, make_frame):
    pipeline = make_pipeline(retrieval_threshold=1.01)

    selection = pipeline.plan(make_frame())

    assert selection.fallback
    assert selection.index == 0
    assert selection.logits is None


def test_text_ablation_uses_zero_embedding(pipeline, make_frame):
    pipeline.set_ablation(('et',))

    selection = pipeline.plan(make_frame())

    expected = pipeline.selector.select(selection.candidates, np.zeros(16))[1]
    np.testing.assert_allclose(selection.logits, expected, rtol=1e-6)


def test_set_ablation(pipeline):
    pipeline.set_ablation(('ei', 'et'))

    assert pipeline.planner.ablate == {'ei'}

    with pytest.raises(ValueError):
        pipeline.set_ablation(('goal',))


def test_selection_log(pipeline, make_frame, tmp_path):
    pipeline.plan(make_frame(), time=0.0)
    pipeline.plan(make_frame(1), time=1.0)
    path = str(tmp_path / 'selections.txt')

    pipeline.write_selections(path)

    log = pipeline.selection_log()
    assert log.columns.tolist() == ['t', 'k', 'max_cosine', 'action']
    assert log['t'].tolist() == [0.0, 1.0]
    with open(path) as selections:
        lines = selections.read().splitlines()

    assert len(lines) == 2
    assert len(lines[1].split(' ')) == 4


def test_plan_world(pipeline):
    world = make_scenario('narrow_hallway', 0)

    trajectory = pipeline.plan_world(world)

    assert len(trajectory) == 10
    assert pipeline.selections[0][0] == 0.0


def test_save_load(pipeline, make_frame, tmp_path):
    folder = str(tmp_path / 'checkpoints')
    frame = make_frame()
    pipeline.save(folder)

    loaded = SocialNavPipeline.load(folder, retrieval_threshold=-1.01)

    expected = pipeline.plan(frame)
    selection = loaded.plan(frame)
    np.testing.assert_allclose(selection.candidates, expected.candidates, rtol=1e-5, atol=1e-6)
    assert selection.index == expected.index


def test_load_names_missing_checkpoints(pipeline, tmp_path):
    folder = tmp_path / 'checkpoints'
    pipeline.save(str(folder))
    (folder / 'tsm.h5').unlink()

    with pytest.raises(FileNotFoundError, match='tsm.h5'):
        SocialNavPipeline.load(str(folder))


def test_save_unfitted(tmp_path):
    with pytest.raises(NotFittedError):
        SocialNavPipeline().save(str(tmp_path))
