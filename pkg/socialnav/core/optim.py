# -*- coding: utf-8 -*-
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass

import torch
from torch import nn

LOGGER = logging.getLogger(__name__)

BETAS = (0.9, 0.999)
EPSILON = 1e-8


class NonFiniteGradientError(ValueError):
    """Raised when an optimizer step would consume a NaN or infinite gradient."""


class ParamStore:
    """Named trainable parameters plus their AdamW state.

    Parameters are kept sorted by name so that iteration order, and therefore
    the optimizer state layout, is deterministic.

    Args:
        parameters (nn.Module or dict):
            Module whose trainable parameters are optimized, or a mapping of
            names to tensors with ``requires_grad=True``.
        lr (float):
            Initial learning rate. Defaults to ``1e-4``.
        weight_decay (float):
            Decoupled weight decay. Defaults to ``0.01``.
    """

    def __init__(self, parameters, lr=1e-4, weight_decay=0.01):
        if isinstance(parameters, nn.Module):
            parameters = dict(parameters.named_parameters())

        named = sorted(
            (name, param) for name, param in parameters.items() if param.requires_grad
        )
        if not named:
            raise ValueError('ParamStore needs at least one trainable parameter')

        self.params = OrderedDict(named)
        self.optimizer = torch.optim.AdamW(
            list(self.params.values()),
            lr=lr,
            betas=BETAS,
            eps=EPSILON,
            weight_decay=weight_decay,
        )
        self.steps = 0

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for param in self.params.values():
            param.grad = None


def adamw_step(store, lr, weight_decay):
    """Apply one AdamW update to every parameter in ``store``.

    Missing gradients count as zero so that decoupled weight decay still
    applies. A NaN or infinite gradient aborts the step before any parameter
    is touched.
    """
    for name, param in store:
        if param.grad is None:
            param.grad = torch.zeros_like(param)

        elif param.grad.shape != param.shape:
            raise ValueError('Gradient of {} has shape {}, expected {}'.format(
                name, tuple(param.grad.shape), tuple(param.shape)))

        if not torch.isfinite(param.grad).all():
            raise NonFiniteGradientError('Non-finite gradient in {}'.format(name))

    for group in store.optimizer.param_groups:
        group['lr'] = lr
        group['weight_decay'] = weight_decay

    store.optimizer.step()
    store.steps += 1


@dataclass
class LrSchedule:
    base_lr: float
    total_steps: int
    min_lr: float = 0.0

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError('base_lr must be positive, got {}'.format(self.base_lr))

        if self.total_steps < 1:
            raise ValueError('total_steps must be at least 1, got {}'.format(self.total_steps))

        if not 0 <= self.min_lr <= self.base_lr:
            raise ValueError('min_lr must be in [0, base_lr], got {}'.format(self.min_lr))


def cosine_lr(schedule, step):
    """Cosine annealed learning rate at ``step`` of ``schedule``."""
    if not 0 <= step <= schedule.total_steps:
        raise ValueError('step {} outside [0, {}]'.format(step, schedule.total_steps))

    progress = math.cos(math.pi * step / schedule.total_steps)
    return schedule.min_lr + 0.5 * (schedule.base_lr - schedule.min_lr) * (1 + progress)
