# -*- coding: utf-8 -*-

"""Lifelong updates of the social context encoders during navigation.

Raster views seen while driving are buffered. Once the buffer is full the
frames are captioned by the caption oracle and both encoders take a few
AdamW steps on a symmetric image-text contrastive loss, after which the
context database is rebuilt with the updated text encoder.
"""

import copy
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import torch

from socialnav.context import build_database
from socialnav.core.losses import contrastive_logits, diagonal_labels, softmax_ce
from socialnav.core.optim import NonFiniteGradientError, ParamStore, adamw_step
from socialnav.sim.captions import CaptionError, caption_oracle

LOGGER = logging.getLogger(__name__)

BUFFER_SIZE = 50
LOG_COLUMNS = ['iteration', 'wall_time', 'batch_size', 'pre_loss', 'post_loss']


class UpdateAbortedError(RuntimeError):
    """Raised when an update produces a non-finite loss; parameters are restored."""


@dataclass
class BufferedFrame:
    raster: np.ndarray
    world: object = None


class FrameBuffer:
    """Fixed capacity buffer of frames collected while navigating."""

    def __init__(self, capacity=BUFFER_SIZE):
        if capacity < 1:
            raise ValueError('Buffer capacity must be at least 1, got {}'.format(capacity))

        self.capacity = capacity
        self.frames = []

    def __len__(self):
        return len(self.frames)

    @property
    def full(self):
        return len(self.frames) >= self.capacity

    def push(self, frame):
        """Store ``frame`` and return ``True`` when it fills the buffer.

        Frames pushed while the buffer is full are discarded until ``clear``.
        """
        if self.full:
            LOGGER.debug('Frame buffer full, discarding frame')
            return False

        self.frames.append(frame)
        return self.full

    def clear(self):
        self.frames = []


def caption_batch(frames, captioner=caption_oracle):
    """Caption every frame, dropping the ones the captioner cannot describe.

    Returns:
        tuple:
            Aligned lists ``(frames, captions)``.
    """
    kept = []
    captions = []
    for index, frame in enumerate(frames):
        try:
            caption = captioner(frame.world)
        except CaptionError as error:
            LOGGER.warning('Dropping frame %s from the update batch: %s', index, error)
            continue

        kept.append(frame)
        captions.append(caption)

    return kept, captions


def llu_loss(image_features, text_features, mu=0.07, symmetric=True):
    """Contrastive loss with temperature ``mu`` on aligned image and text features.

    With ``symmetric`` the image to text and text to image cross entropies are
    averaged, otherwise only the image to text direction is used.
    """
    if mu <= 0:
        raise ValueError('Temperature must be positive, got {}'.format(mu))

    if image_features.shape != text_features.shape:
        raise ValueError('Got {} image features for {} text features'.format(
            tuple(image_features.shape), tuple(text_features.shape)))

    logits = contrastive_logits(image_features, text_features, 1.0 / mu)
    labels = diagonal_labels(len(logits), device=logits.device)
    image_to_text = softmax_ce(logits, labels)
    if not symmetric:
        return image_to_text

    return 0.5 * (image_to_text + softmax_ce(logits.t(), labels))


@dataclass
class UpdateState:
    iteration: int = 0
    mu: float = 0.07
    lr: float = 1e-5
    steps: int = 10
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.mu <= 0 or self.lr <= 0:
            raise ValueError('Update temperature and learning rate must be positive')

        if self.steps < 0:
            raise ValueError('Update steps must be non-negative, got {}'.format(self.steps))


@dataclass
class UpdateRecord:
    iteration: int
    wall_time: float
    batch_size: int
    pre_loss: float
    post_loss: float
    applied: bool = True
    texts: list = field(default_factory=list, repr=False)


class LifelongUpdater:
    """Buffer frames, caption them and fine-tune the social context encoders.

    Updates must not overlap with inference: the caller runs them between
    episodes, never while the planner is using the encoders.

    Args:
        model (SocialContextModel):
            Encoders to update in place.
        database (ContextDatabase):
            Database whose captions are re-embedded after each update.
        state (UpdateState):
            Update hyperparameters and iteration counter.
        buffer_size (int):
            Frames collected before an update triggers.
        captioner (callable):
            ``captioner(world)`` returning a ``CaptionPair``.
        symmetric (bool):
            Use both contrastive directions.
        log_path (str):
            Optional file receiving one line per update.
    """

    def __init__(self, model, database, state=None, buffer_size=BUFFER_SIZE,
                 captioner=caption_oracle, symmetric=True, log_path=None):
        self.model = model
        self.database = database
        self.state = state or UpdateState(iteration=model.iteration)
        self.buffer = FrameBuffer(buffer_size)
        self.captioner = captioner
        self.symmetric = symmetric
        self.log_path = log_path
        self.history = []

    def push_frame(self, raster, world=None):
        return self.buffer.push(BufferedFrame(np.asarray(raster), world))

    def batch_loss(self, rasters, texts):
        images = self.model.encode_images(rasters).embedding
        captions = self.model.encode_texts(texts)
        return llu_loss(images, captions, self.state.mu, self.symmetric)

    def _evaluate(self, rasters, texts):
        self.model.eval()
        with torch.no_grad():
            return self.batch_loss(rasters, texts).item()

    def _abort(self, snapshot, reason):
        self.model.load_state_dict(snapshot)
        self.model.eval()
        LOGGER.error('Lifelong update aborted at iteration %s: %s', self.state.iteration, reason)
        raise UpdateAbortedError(reason)

    def _write_log(self, record):
        if not self.log_path:
            return

        folder = os.path.dirname(self.log_path)
        if folder:
            os.makedirs(folder, exist_ok=True)

        row = pd.DataFrame([[getattr(record, column) for column in LOG_COLUMNS]],
                           columns=LOG_COLUMNS)
        row.to_csv(self.log_path, sep=' ', header=False, index=False, mode='a',
                   float_format='%.6f')

    def apply_update(self, rasters, captions):
        """Fine-tune both encoders on an aligned batch of frames and captions.

        The update is rolled back, without advancing the iteration, when the
        loss on the batch ends up higher than before it.

        Returns:
            UpdateRecord
        """
        if len(rasters) != len(captions) or not len(captions):
            raise ValueError('Update needs aligned non-empty batches, got {} and {}'.format(
                len(rasters), len(captions)))

        rasters = np.asarray(rasters)
        texts = [caption.long_text for caption in captions]
        start = time.time()
        pre_loss = self._evaluate(rasters, texts)

        if not self.state.steps:
            LOGGER.info('Lifelong update configured with zero steps, nothing to do')
            return UpdateRecord(self.state.iteration, 0.0, len(texts), pre_loss, pre_loss,
                                applied=False, texts=texts)

        snapshot = copy.deepcopy(self.model.state_dict())
        store = ParamStore(self.model, lr=self.state.lr, weight_decay=self.state.weight_decay)
        self.model.train()
        for _ in range(self.state.steps):
            loss = self.batch_loss(rasters, texts)
            if not torch.isfinite(loss):
                self._abort(snapshot, 'non-finite loss {}'.format(loss.item()))

            store.zero_grad()
            loss.backward()
            try:
                adamw_step(store, self.state.lr, self.state.weight_decay)
            except NonFiniteGradientError as error:
                self._abort(snapshot, str(error))

        post_loss = self._evaluate(rasters, texts)
        if not np.isfinite(post_loss):
            self._abort(snapshot, 'non-finite loss {}'.format(post_loss))

        applied = post_loss <= pre_loss
        if applied:
            self.model.iteration = self.state.iteration + 1
            self.state.iteration = self.model.iteration
            self.database = build_database(self.database.captions, self.model)
            LOGGER.info('Lifelong update %s: loss %.6f -> %.6f on %s frames',
                        self.state.iteration, pre_loss, post_loss, len(texts))
        else:
            self.model.load_state_dict(snapshot)
            self.model.eval()
            LOGGER.warning('Lifelong update rolled back, loss rose %.6f -> %.6f',
                           pre_loss, post_loss)

        record = UpdateRecord(self.state.iteration, time.time() - start, len(texts),
                              pre_loss, post_loss, applied, texts)
        self.history.append(record)
        self._write_log(record)

        return record

    def update_from_buffer(self):
        """Caption the buffered frames, update, and empty the buffer.

        The buffer is kept when the update aborts.
        """
        frames, captions = caption_batch(self.buffer.frames, self.captioner)
        if not frames:
            LOGGER.warning('No frame of the buffer could be captioned, skipping update')
            self.buffer.clear()
            return None

        rasters = np.stack([frame.raster for frame in frames])
        record = self.apply_update(rasters, captions)
        self.buffer.clear()
        return record
