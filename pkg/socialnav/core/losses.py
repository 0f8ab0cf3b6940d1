# -*- coding: utf-8 -*-
import logging

import torch
import torch.nn.functional as F

LOGGER = logging.getLogger(__name__)


def softmax_ce(logits, labels):
    """Mean cross entropy of ``(N, M)`` logits against integer labels."""
    if logits.dim() != 2:
        raise ValueError('Expected (N, M) logits, got shape {}'.format(tuple(logits.shape)))

    labels = torch.as_tensor(labels, dtype=torch.long, device=logits.device).reshape(-1)
    if len(labels) != logits.shape[0]:
        raise ValueError('Got {} labels for {} rows'.format(len(labels), logits.shape[0]))

    if len(labels) and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError('Labels must be in [0, {})'.format(logits.shape[1]))

    return F.cross_entropy(logits, labels)


def cosine_similarity(first, second):
    """Cosine of the angle between two non-zero vectors."""
    first = torch.as_tensor(first)
    second = torch.as_tensor(second)
    if first.shape != second.shape:
        raise ValueError('Shape mismatch: {} vs {}'.format(
            tuple(first.shape), tuple(second.shape)))

    first_norm = torch.linalg.vector_norm(first)
    second_norm = torch.linalg.vector_norm(second)
    if first_norm == 0 or second_norm == 0:
        raise ValueError('Cosine similarity is undefined for zero vectors')

    return torch.dot(first.reshape(-1), second.reshape(-1)) / (first_norm * second_norm)


def contrastive_logits(first, second, scale):
    """Scaled similarity matrix ``scale * first @ second.T``."""
    if first.dim() != 2 or first.shape != second.shape:
        raise ValueError('Expected matching (N, D) batches, got {} and {}'.format(
            tuple(first.shape), tuple(second.shape)))

    if not len(first):
        raise ValueError('Contrastive losses need a non-empty batch')

    return scale * first @ second.t()


def diagonal_labels(count, device=None):
    return torch.arange(count, device=device)
