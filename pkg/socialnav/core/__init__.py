# -*- coding: utf-8 -*-

"""Neural network building blocks, optimization and checkpointing."""

from socialnav.core.checkpoint import load_checkpoint, save_checkpoint
from socialnav.core.gradcheck import GradCheckReport, grad_check
from socialnav.core.layers import AttentionLayer, ResidualBlock, ResidualFFN, gru_step
from socialnav.core.losses import cosine_similarity, softmax_ce
from socialnav.core.optim import (
    LrSchedule, NonFiniteGradientError, ParamStore, adamw_step, cosine_lr)
from socialnav.core.training import TrainingDivergedError, train_model

__all__ = (
    'AttentionLayer',
    'GradCheckReport',
    'LrSchedule',
    'NonFiniteGradientError',
    'ParamStore',
    'ResidualBlock',
    'ResidualFFN',
    'TrainingDivergedError',
    'adamw_step',
    'cosine_lr',
    'cosine_similarity',
    'grad_check',
    'gru_step',
    'load_checkpoint',
    'save_checkpoint',
    'softmax_ce',
    'train_model',
)
