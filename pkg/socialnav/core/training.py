# -*- coding: utf-8 -*-
import copy
import logging
import math

import numpy as np
import pandas as pd
import torch
from tqdm.auto import trange

from socialnav.core.optim import LrSchedule, ParamStore, adamw_step, cosine_lr

LOGGER = logging.getLogger(__name__)

HISTORY_COLUMNS = ['epoch', 'train_loss', 'val_loss', 'lr']


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss becomes NaN or infinite."""


def iterate_batches(count, batch_size, rng=None):
    """Yield index arrays covering ``range(count)``, shuffled when ``rng`` is given."""
    order = np.arange(count) if rng is None else rng.permutation(count)
    for start in range(0, count, batch_size):
        yield order[start:start + batch_size]


def evaluate_loss(model, loss_fn, samples, batch_size):
    """Sample-weighted mean of ``loss_fn`` over ``samples`` in evaluation mode."""
    if not len(samples):
        return float('nan')

    model.eval()
    total = 0.0
    with torch.no_grad():
        for indices in iterate_batches(len(samples), batch_size):
            batch = [samples[index] for index in indices]
            total += loss_fn(model, batch).item() * len(batch)

    return total / len(samples)


def train_model(model, loss_fn, train_samples, val_samples=(), epochs=1, batch_size=32,
                lr=1e-4, weight_decay=0.01, min_lr=0.0, patience=None, seed=0,
                description='training', verbose=False):
    """Train ``model`` with AdamW and a cosine annealed learning rate.

    After every epoch the validation loss is measured and the parameters with
    the lowest validation loss are kept. When no validation samples are given
    the training loss is used instead. Training stops early after ``patience``
    epochs without improvement.

    Args:
        model (nn.Module):
            Model to train in place.
        loss_fn (callable):
            ``loss_fn(model, batch)`` returning a scalar tensor for a list of samples.
        train_samples (sequence):
            Training samples, indexable.
        val_samples (sequence):
            Validation samples, indexable.

    Returns:
        pandas.DataFrame:
            Per-epoch ``train_loss``, ``val_loss`` and ``lr``.
    """
    if not len(train_samples):
        raise ValueError('Cannot train {} on an empty dataset'.format(description))

    batches_per_epoch = math.ceil(len(train_samples) / batch_size)
    schedule = LrSchedule(lr, max(1, epochs * batches_per_epoch), min_lr)
    store = ParamStore(model, lr=lr, weight_decay=weight_decay)
    rng = np.random.default_rng(seed)

    history = []
    best_loss = float('inf')
    best_state = copy.deepcopy(model.state_dict())
    stale_epochs = 0

    for epoch in trange(epochs, desc=description, disable=not verbose):
        model.train()
        total = 0.0
        for indices in iterate_batches(len(train_samples), batch_size, rng):
            batch = [train_samples[index] for index in indices]
            loss = loss_fn(model, batch)
            if not torch.isfinite(loss):
                LOGGER.error('%s diverged at epoch %s step %s', description, epoch, store.steps)
                raise TrainingDivergedError(
                    '{} loss became {} at step {}'.format(description, loss.item(), store.steps))

            step_lr = cosine_lr(schedule, store.steps)
            store.zero_grad()
            loss.backward()
            adamw_step(store, step_lr, weight_decay)
            total += loss.item() * len(batch)

        train_loss = total / len(train_samples)
        if len(val_samples):
            val_loss = evaluate_loss(model, loss_fn, val_samples, batch_size)
        else:
            val_loss = evaluate_loss(model, loss_fn, train_samples, batch_size)

        history.append((epoch, train_loss, val_loss, step_lr))
        LOGGER.debug('%s epoch %s: train %.6f val %.6f', description, epoch, train_loss, val_loss)

        if val_loss < best_loss:
            best_loss = val_loss
            best_state = copy.deepcopy(model.state_dict())
            stale_epochs = 0
        else:
            stale_epochs += 1
            if patience is not None and stale_epochs >= patience:
                LOGGER.info('%s stopped early at epoch %s', description, epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    LOGGER.info('%s finished with best validation loss %.6f', description, best_loss)

    return pd.DataFrame(history, columns=HISTORY_COLUMNS)
