# -*- coding: utf-8 -*-

"""Dataset builders for the three training stages.

Every builder drives seeded scenario episodes with the scripted expert and
records one frame per replanning step:

* ``sc``: raster view and caption pair, for the social context model.
* ``tpn``: raster view, LiDAR scan, goal and the expert's next ten poses.
* ``tsm``: everything in ``tpn`` plus the caption, the planner's candidates,
  the caption embedding and the index of the candidate closest to the expert.

Episodes are generated in parallel with dask; records are ordered by
episode, so the result does not depend on the number of workers.
"""

import logging
import os

import dask
import numpy as np
import torch

from socialnav.geometry import transform_to_initial_frame
from socialnav.loaders.records import (
    MANIFEST_FILE, RECORDS_FILE, SCHEMA_VERSION, DatasetError, RecordLoader, write_manifest,
    write_records)
from socialnav.sim.captions import CaptionError, caption_oracle
from socialnav.sim.expert import plan_expert
from socialnav.sim.rollout import drive
from socialnav.sim.scenarios import SCENARIOS, make_scenario
from socialnav.sim.sensors import rasterize_view, sense
from socialnav.targets import best_candidate, split_boundaries
from socialnav.utils import file_sha256

LOGGER = logging.getLogger(__name__)

__all__ = (
    'DATASET_KINDS',
    'DatasetError',
    'build_dataset',
    'build_dsc',
    'build_dtpn',
    'build_dtsm',
    'dump',
    'format_record',
    'load_dataset',
    'sample_world',
    'write_dataset',
)

DATASET_KINDS = ('sc', 'tpn', 'tsm')
FRAMES_PER_EPISODE = 20
REPLAN_EVERY = 10
EPISODES_PER_ROUND = 16


def episode_seed(seed, episode):
    return seed * 10000 + episode


def episode_kind(episode, kinds=SCENARIOS):
    return kinds[episode % len(kinds)]


def _collect_frames(kind, seed, frames, replan_every=REPLAN_EVERY, dt=0.1):
    """World copies and expert plans at the first ``frames`` replanning steps."""
    world = make_scenario(kind, seed, dt)
    captured = []

    def planner(current):
        plan = plan_expert(current)
        captured.append((current.copy(), plan))
        return plan.trajectory

    drive(world, planner=planner, max_steps=frames * replan_every, replan_every=replan_every)
    return captured[:frames]


def sample_world(kind, seed, index, replan_every=REPLAN_EVERY, dt=0.1):
    """World state at the ``index``-th replanning step of a seeded expert episode."""
    captured = _collect_frames(kind, seed, index + 1, replan_every, dt)
    if len(captured) <= index:
        raise DatasetError('Episode {} of {} ends before frame {}'.format(seed, kind, index))

    return captured[index][0]


def _raster(world):
    return rasterize_view(world.robot, world).astype(np.uint8)


@dask.delayed
def _episode_records(dataset, kind, seed, episode, frames, replan_every, dt):
    records = []
    for index, (world, plan) in enumerate(_collect_frames(kind, seed, frames, replan_every, dt)):
        record = {}
        if dataset in ('sc', 'tsm'):
            try:
                caption = caption_oracle(world)
            except CaptionError as error:
                LOGGER.warning('Skipping frame %s of episode %s: %s', index, episode, error)
                continue

            record.update(long=caption.long_text, short=caption.short_text,
                          action=caption.action)

        if dataset == 'sc':
            record['raster'] = _raster(world)
        else:
            frame = sense(world)
            record.update(
                raster=frame.raster.astype(np.uint8),
                scan=frame.scan.astype(np.float32),
                goal=frame.goal.as_array().astype(np.float32),
                expert=transform_to_initial_frame(plan.trajectory).poses.astype(np.float32),
            )

        record.update(kind=kind, episode=episode, frame=index, seed=seed)
        records.append(record)

    return records


def _generate(dataset, count, seed, frames=FRAMES_PER_EPISODE, replan_every=REPLAN_EVERY,
              dt=0.1, kinds=SCENARIOS, workers=1):
    if count < 1:
        raise ValueError('Dataset size must be positive, got {}'.format(count))

    if workers <= 1:
        options = {'scheduler': 'single-threaded'}
    else:
        options = {'scheduler': 'threads', 'num_workers': workers}

    records = []
    episode = 0
    while len(records) < count:
        tasks = []
        for _ in range(EPISODES_PER_ROUND):
            kind = episode_kind(episode, kinds)
            tasks.append(_episode_records(dataset, kind, episode_seed(seed, episode), episode,
                                          frames, replan_every, dt))
            episode += 1

        before = len(records)
        for episode_records in dask.compute(*tasks, **options):
            records.extend(episode_records)

        if len(records) == before:
            raise DatasetError('{} episodes produced no {} records'.format(len(tasks), dataset))

        LOGGER.debug('Generated %s/%s %s records', min(len(records), count), count, dataset)

    return records[:count]


def build_dsc(count, seed, **kwargs):
    """Caption records: raster view plus long and short captions and the action."""
    return _generate('sc', count, seed, **kwargs)


def build_dtpn(count, seed, **kwargs):
    """Planner records: sensors at the frame plus the expert's next ten poses."""
    return _generate('tpn', count, seed, **kwargs)


def build_dtsm(count, seed, planner, context_model, batch_size=256, **kwargs):
    """Selection records: planner candidates, caption embedding and best candidate index.

    Args:
        planner (TrajectoryPlanner):
            Trained planner producing the candidates.
        context_model (SocialContextModel):
            Trained social context model providing image tokens and caption
            embeddings.
    """
    records = _generate('tsm', count, seed, **kwargs)
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        image_tokens = context_model.image_tokens(np.stack([record['raster'] for record in chunk]))
        candidates = planner.predict(
            image_tokens,
            [record['scan'] for record in chunk],
            np.stack([record['goal'] for record in chunk]),
        )
        context_model.eval()
        with torch.no_grad():
            texts = context_model.encode_texts([record['long'] for record in chunk]).numpy()

        for record, candidate_set, text in zip(chunk, candidates, texts):
            record['candidates'] = candidate_set.astype(np.float32)
            record['text'] = text.astype(np.float32)
            record['label'] = best_candidate(candidate_set, record['expert'], record['action'])

    return records


def write_dataset(folder, kind, records, seed, config=None):
    """Write ``records.bin`` and ``manifest.txt`` into ``folder``.

    Returns:
        dict:
            The manifest.
    """
    if kind not in DATASET_KINDS:
        raise ValueError('Unknown dataset kind {!r}'.format(kind))

    os.makedirs(folder, exist_ok=True)
    records_path = os.path.join(folder, RECORDS_FILE)
    count = write_records(records_path, records)

    manifest = {
        'kind': kind,
        'count': count,
        'seed': seed,
        'schema_version': SCHEMA_VERSION,
    }
    manifest.update(split_boundaries([record['episode'] for record in records]))
    manifest['sha256'] = file_sha256(records_path)
    manifest['config'] = dict(config or {})
    write_manifest(os.path.join(folder, MANIFEST_FILE), manifest)

    LOGGER.info('Wrote %s %s records to %s', count, kind, folder)
    return manifest


def build_dataset(kind, folder, count, seed, planner=None, context_model=None, config=None,
                  **kwargs):
    """Build and write a dataset of ``kind``."""
    if kind == 'sc':
        records = build_dsc(count, seed, **kwargs)
    elif kind == 'tpn':
        records = build_dtpn(count, seed, **kwargs)
    elif kind == 'tsm':
        if planner is None or context_model is None:
            raise ValueError('Selection datasets need a trained planner and context model')

        records = build_dtsm(count, seed, planner, context_model, **kwargs)
    else:
        raise ValueError('Unknown dataset kind {!r}'.format(kind))

    return write_dataset(folder, kind, records, seed, config)


def load_dataset(folder, kind=None, split=None):
    """Records of a dataset folder, checked against its manifest."""
    loader = RecordLoader(folder)
    if kind is not None and loader.manifest['kind'] != kind:
        raise DatasetError('{} holds a {} dataset, expected {}'.format(
            folder, loader.manifest['kind'], kind))

    return loader.load(split)


def format_record(record):
    """Human readable rendering of a record."""
    lines = []
    for name, value in record.items():
        if isinstance(value, np.ndarray):
            header = '{}: {} {}'.format(name, value.dtype, value.shape)
            body = np.array2string(value, precision=4, threshold=200, max_line_width=99)
            lines.append(header)
            lines.extend('    ' + line for line in body.splitlines())
        else:
            lines.append('{}: {}'.format(name, value))

    return '\n'.join(lines)


def dump(folder, index):
    return format_record(RecordLoader(folder).get(index))
