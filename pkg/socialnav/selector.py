# -*- coding: utf-8 -*-

"""Trajectory selection from the retrieved social context."""

import logging

import numpy as np
import torch
from sklearn.exceptions import NotFittedError
from torch import nn

from socialnav.core.checkpoint import (
    load_checkpoint, load_module_tensors, module_tensors, save_checkpoint)
from socialnav.core.layers import init_linear
from socialnav.core.losses import softmax_ce
from socialnav.core.training import train_model

LOGGER = logging.getLogger(__name__)

HIDDEN = 64
FUSION_HIDDEN = 128
SEPARABLE_ACTIONS = ('veer-left', 'veer-right', 'proceed')
SEPARABLE_OFFSETS = (-1.5, -0.75, 0.0, 0.75, 1.5)
ACTION_VECTOR_SEED = 1234


def pose_features(candidates):
    """``(..., 3)`` poses to ``(..., 4)`` features ``x, y, sin(phi), cos(phi)``."""
    return torch.cat([
        candidates[..., :2],
        torch.sin(candidates[..., 2:]),
        torch.cos(candidates[..., 2:]),
    ], dim=-1)


class SelectionHead(nn.Module):
    """Score ``K`` candidate trajectories jointly against a text embedding.

    The text embedding goes through a feed forward layer, every candidate
    through a shared per-pose feed forward layer and a GRU over its poses.
    The final GRU states of all candidates, in candidate order, are
    concatenated with the text features and mapped to ``K`` logits.
    """

    fitted = False

    def __init__(self, embedding_dim=64, candidates=5, horizon=10, hidden=HIDDEN,
                 fusion_hidden=FUSION_HIDDEN):
        super().__init__()
        self.hyperparameters = {
            'embedding_dim': embedding_dim,
            'candidates': candidates,
            'horizon': horizon,
            'hidden': hidden,
            'fusion_hidden': fusion_hidden,
        }
        self.candidates = candidates
        self.horizon = horizon
        self.text_ffn = nn.Sequential(nn.Linear(embedding_dim, hidden), nn.ReLU())
        self.pose_ffn = nn.Sequential(nn.Linear(4, hidden), nn.ReLU())
        self.gru = nn.GRU(hidden, hidden, batch_first=True)
        self.fusion = nn.Sequential(
            nn.Linear(candidates * hidden + hidden, fusion_hidden),
            nn.ReLU(),
            nn.Linear(fusion_hidden, candidates),
        )
        self.apply(init_linear)

    def embed_candidates(self, candidates):
        """``(B, K, T, 3)`` candidates to ``(B, K * hidden)`` embeddings."""
        expected = (self.candidates, self.horizon, 3)
        if candidates.dim() != 4 or tuple(candidates.shape[1:]) != expected:
            raise ValueError('Expected candidates of shape (B, {}, {}, {}), got {}'.format(
                *expected, tuple(candidates.shape)))

        batch = candidates.shape[0]
        steps = self.pose_ffn(pose_features(candidates)).reshape(
            batch * self.candidates, self.horizon, -1)
        _, final = self.gru(steps)
        return final[-1].reshape(batch, -1)

    def forward(self, candidates, text_embeddings):
        text = self.text_ffn(text_embeddings)
        return self.fusion(torch.cat([self.embed_candidates(candidates), text], dim=-1))

    def select(self, candidates, text_embedding):
        """Index of the best candidate; the lowest index wins ties.

        Args:
            candidates (array-like):
                ``(K, T, 3)`` candidate poses.
            text_embedding (array-like):
                ``(D,)`` retrieved text embedding.

        Returns:
            tuple:
                ``(index, logits)``.
        """
        if not self.fitted:
            raise NotFittedError('The selection head has not been trained or loaded')

        dtype = self.fusion[0].weight.dtype
        candidates = torch.as_tensor(np.asarray(candidates), dtype=dtype).unsqueeze(0)
        text = torch.as_tensor(np.asarray(text_embedding), dtype=dtype).reshape(1, -1)
        self.eval()
        with torch.no_grad():
            logits = self(candidates, text)[0].cpu().numpy().astype(float)

        return int(np.argmax(logits)), logits

    def save(self, path):
        metadata = dict(self.hyperparameters, fitted=self.fitted)
        save_checkpoint(path, module_tensors(self), metadata)

    @classmethod
    def load(cls, path):
        tensors, metadata, _ = load_checkpoint(path)
        fitted = metadata.pop('fitted', False)
        head = cls(**metadata)
        load_module_tensors(head, tensors)
        head.fitted = fitted
        head.eval()
        return head


def tsm_loss(head, candidates, text_embeddings, labels):
    """Cross entropy of the ``K`` selection logits against the best candidate index."""
    return softmax_ce(head(candidates, text_embeddings), labels)


def _collate(batch, dtype):
    return (
        torch.as_tensor(np.stack([sample['candidates'] for sample in batch]), dtype=dtype),
        torch.as_tensor(np.stack([sample['text'] for sample in batch]), dtype=dtype),
        torch.as_tensor([int(sample['label']) for sample in batch], dtype=torch.long),
    )


def selector_batch_loss(head, batch):
    return tsm_loss(head, *_collate(batch, head.fusion[0].weight.dtype))


def train_tsm(head, train_samples, val_samples=(), epochs=500, batch_size=128, lr=1e-5,
              weight_decay=1e-5, patience=None, seed=0, verbose=False):
    """Train the selection head on ``candidates``, ``text`` and ``label`` samples."""
    history = train_model(
        head, selector_batch_loss, train_samples, val_samples,
        epochs=epochs, batch_size=batch_size, lr=lr, weight_decay=weight_decay,
        patience=patience, seed=seed, description='tsm', verbose=verbose)
    head.fitted = True
    return history


def selection_accuracy(head, samples):
    if not len(samples):
        raise ValueError('Selection accuracy needs at least one sample')

    hits = sum(
        head.select(sample['candidates'], sample['text'])[0] == int(sample['label'])
        for sample in samples
    )
    return hits / len(samples)


def action_vectors(embedding_dim=64):
    """Fixed random unit text vector for each separable action."""
    rng = np.random.default_rng(ACTION_VECTOR_SEED)
    vectors = rng.normal(size=(len(SEPARABLE_ACTIONS), embedding_dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return dict(zip(SEPARABLE_ACTIONS, vectors))


def make_separable_set(count, seed=0, candidates=5, horizon=10, embedding_dim=64, noise=0.1):
    """Synthetic selection samples where the action names the right candidate.

    Candidates bend towards lateral end offsets drawn from a fixed set in a
    random order. ``veer-left`` labels the leftmost candidate, ``veer-right``
    the rightmost one and ``proceed`` the straightest one.
    """
    rng = np.random.default_rng(seed)
    vectors = action_vectors(embedding_dim)
    offsets = np.resize(np.array(SEPARABLE_OFFSETS), candidates)
    progress = np.arange(1, horizon + 1) / horizon

    samples = []
    for _ in range(count):
        action = SEPARABLE_ACTIONS[rng.integers(len(SEPARABLE_ACTIONS))]
        finals = rng.permutation(offsets) + rng.normal(0.0, noise, candidates)
        reach = 5.0 * (1.0 + rng.normal(0.0, noise))

        x = np.outer(np.ones(candidates), reach * progress)
        y = np.outer(finals, progress ** 2)
        heading = np.arctan2(np.outer(finals, 2 * progress), reach)
        trajectories = np.stack([x, y, heading], axis=-1)

        if action == 'veer-left':
            label = int(np.argmax(finals))
        elif action == 'veer-right':
            label = int(np.argmin(finals))
        else:
            label = int(np.argmin(np.abs(finals)))

        text = vectors[action] + rng.normal(0.0, noise / 10, embedding_dim)
        samples.append({
            'candidates': trajectories.astype(np.float32),
            'text': (text / np.linalg.norm(text)).astype(np.float32),
            'label': label,
            'action': action,
        })

    return samples
