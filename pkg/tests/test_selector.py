"""Tests for `socialnav.selector` module."""
import math
from unittest import TestCase

import numpy as np
import pytest
import torch
from sklearn.exceptions import NotFittedError

from socialnav.core import grad_check
from socialnav.selector import (
    SEPARABLE_ACTIONS, SelectionHead, action_vectors, make_separable_set, pose_features,
    selection_accuracy, selector_batch_loss, train_tsm, tsm_loss)


def _head(**kwargs):
    torch.manual_seed(0)
    return SelectionHead(embedding_dim=8, candidates=5, horizon=10, hidden=8, fusion_hidden=16,
                         **kwargs)


def test_pose_features():
    features = pose_features(torch.tensor([[1.0, 2.0, math.pi / 2]]))

    torch.testing.assert_close(features, torch.tensor([[1.0, 2.0, 1.0, 0.0]]),
                               atol=1e-6, rtol=0)


class TestSelectionHead(TestCase):

    def setUp(self):
        self.head = _head()
        self.samples = make_separable_set(4, embedding_dim=8)

    def test_logits_shape(self):
        candidates = torch.zeros(3, 5, 10, 3)

        assert self.head(candidates, torch.zeros(3, 8)).shape == (3, 5)

    def test_wrong_candidate_shape(self):
        with pytest.raises(ValueError):
            self.head(torch.zeros(1, 4, 10, 3), torch.zeros(1, 8))

    def test_select_requires_training(self):
        sample = self.samples[0]

        with pytest.raises(NotFittedError):
            self.head.select(sample['candidates'], sample['text'])

    def test_select(self):
        self.head.fitted = True
        sample = self.samples[0]

        index, logits = self.head.select(sample['candidates'], sample['text'])

        assert logits.shape == (5,)
        assert index == int(np.argmax(logits))

    def test_uniform_logits_loss(self):
        with torch.no_grad():
            self.head.fusion[-1].weight.zero_()
            self.head.fusion[-1].bias.zero_()

        loss = selector_batch_loss(self.head, self.samples)

        assert loss.item() == pytest.approx(math.log(5), abs=1e-6)

    def test_gradients(self):
        head = _head().double()
        generator = torch.Generator().manual_seed(1)
        candidates = torch.randn(2, 5, 10, 3, generator=generator, dtype=torch.float64)
        text = torch.randn(2, 8, generator=generator, dtype=torch.float64)
        params = {
            'text_bias': head.text_ffn[0].bias,
            'gru_bias': head.gru.bias_hh_l0,
            'fusion_bias': head.fusion[-1].bias,
        }

        report = grad_check(lambda: tsm_loss(head, candidates, text, [1, 3]), params)

        assert report.passed, report.failures()


def test_head_save_load(tmp_path):
    path = str(tmp_path / 'tsm.h5')
    head = _head()
    head.fitted = True
    head.save(path)

    loaded = SelectionHead.load(path)

    sample = make_separable_set(1, embedding_dim=8)[0]
    assert loaded.fitted
    np.testing.assert_allclose(
        loaded.select(sample['candidates'], sample['text'])[1],
        head.select(sample['candidates'], sample['text'])[1])


def test_unfitted_checkpoint(tmp_path):
    path = str(tmp_path / 'tsm.h5')
    _head().save(path)

    assert not SelectionHead.load(path).fitted


def test_action_vectors():
    vectors = action_vectors(8)

    assert sorted(vectors) == sorted(SEPARABLE_ACTIONS)
    for vector in vectors.values():
        assert np.linalg.norm(vector) == pytest.approx(1.0)


def test_separable_set_labels():
    for sample in make_separable_set(30, seed=2):
        finals = sample['candidates'][:, -1, 1]
        if sample['action'] == 'veer-left':
            assert sample['label'] == int(np.argmax(finals))
        elif sample['action'] == 'veer-right':
            assert sample['label'] == int(np.argmin(finals))
        else:
            assert sample['label'] == int(np.argmin(np.abs(finals)))

        assert sample['candidates'].shape == (5, 10, 3)


def test_separable_set_deterministic():
    first = make_separable_set(5, seed=3)
    second = make_separable_set(5, seed=3)

    for one, two in zip(first, second):
        np.testing.assert_array_equal(one['candidates'], two['candidates'])
        assert one['label'] == two['label']


def test_selection_accuracy_empty():
    with pytest.raises(ValueError):
        selection_accuracy(_head(), [])


@pytest.mark.slow
def test_learns_separable_set():
    head = _head()
    train = make_separable_set(300, seed=0, embedding_dim=8)
    test = make_separable_set(100, seed=1, embedding_dim=8)

    history = train_tsm(head, train, epochs=60, batch_size=32, lr=1e-2, weight_decay=0.0)

    assert head.fitted
    assert history['train_loss'].iloc[-1] < history['train_loss'].iloc[0]
    assert selection_accuracy(head, test) >= 0.8
