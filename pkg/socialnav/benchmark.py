# -*- coding: utf-8 -*-

"""Closed loop episodes and offline evaluation of a trained pipeline."""

import copy
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from tqdm import tqdm

from socialnav.geometry import Pose
from socialnav.lifelong import BufferedFrame, LifelongUpdater, UpdateState, caption_batch
from socialnav.metrics import METRICS, hausdorff, mse, psv_duration
from socialnav.pipeline import SocialNavPipeline
from socialnav.sim.rollout import drive
from socialnav.sim.scenarios import make_scenario
from socialnav.sim.sensors import SensorFrame, rasterize_view

LOGGER = logging.getLogger(__name__)

VARIANTS = {
    'full': (),
    'w/o E_I': ('ei',),
    'w/o E_T': ('et',),
    'w/o E_L': ('el',),
}
TABLE_COLUMNS = [
    'family', 'variant', 'before_mse', 'before_hausdorff', 'after_mse', 'after_hausdorff']


@dataclass
class EpisodeResult:
    trace: object
    expert: object
    metrics: dict
    update: object = None


def rollout_expert(world, max_steps=600, replan_every=10):
    """Scripted expert driven by the same controller and replanning rate."""
    return drive(world.copy(), max_steps=max_steps, replan_every=replan_every)


def episode_metrics(trace, expert, metrics=METRICS):
    """Trajectory error against the expert plus safety outcomes of an episode."""
    scores = {
        name: function(expert.trajectory(), trace.trajectory())
        for name, (function, _) in metrics.items()
    }
    scores.update(
        psv=psv_duration(trace.robot_track(), trace.human_tracks()),
        duration=float(trace.times[-1] - trace.times[0]),
        reached_goal=trace.reached_goal,
        wall_collision=trace.wall_collision,
        human_collision=trace.human_collision,
    )
    return scores


def run_episode(pipeline, world, max_steps=600, replan_every=10, updater=None):
    """Drive ``world`` with the pipeline and score it against the expert.

    With an ``updater``, one raster view every ``max(1, max_steps // capacity)``
    steps is buffered and, if the buffer filled up, a lifelong update runs
    once the episode is over.

    Returns:
        EpisodeResult
    """
    expert = rollout_expert(world, max_steps, replan_every)

    on_step = None
    if updater is not None:
        stride = max(1, max_steps // updater.buffer.capacity)

        def on_step(current, step):
            if step % stride == 0 and not updater.buffer.full:
                raster = rasterize_view(current.robot, current).astype(np.uint8)
                updater.push_frame(raster, current.copy())

    trace = drive(world, pipeline.plan_world, pipeline.controller, max_steps, replan_every,
                  on_step=on_step)

    update = None
    if updater is not None and updater.buffer.full:
        update = updater.update_from_buffer()
        pipeline.database = updater.database

    metrics = episode_metrics(trace, expert)
    LOGGER.info('Episode finished after %.1fs: mse %.4f, hausdorff %.4f, psv %.1fs',
                metrics['duration'], metrics['mse'], metrics['hausdorff'], metrics['psv'])
    return EpisodeResult(trace, expert, metrics, update)


def evaluate_scenario(pipeline, kind, seeds, max_steps=600, replan_every=10, dt=0.1):
    """One closed loop episode per seed of a scenario family.

    Returns:
        pandas.DataFrame
    """
    rows = []
    for seed in tqdm(seeds, desc=kind, disable=len(seeds) < 2):
        result = run_episode(pipeline, make_scenario(kind, seed, dt), max_steps, replan_every)
        rows.append(dict(result.metrics, family=kind, seed=seed))

    return pd.DataFrame(rows)


def plot_episode(path, world, trace, expert=None):
    """Write an SVG with walls, people, the robot path and the expert path."""
    figure = Figure(figsize=(6, 6))
    axes = figure.add_subplot(1, 1, 1)
    for (x0, y0), (x1, y1) in np.asarray(world.walls).reshape(-1, 2, 2):
        axes.plot([x0, x1], [y0, y1], color='black', linewidth=2)

    for index in range(trace.humans.shape[1]):
        path_xy = trace.humans[:, index]
        axes.plot(path_xy[:, 0], path_xy[:, 1], color='tab:orange', alpha=0.6)
        axes.plot(*path_xy[-1], marker='o', color='tab:orange')

    if expert is not None:
        axes.plot(expert.robot[:, 0], expert.robot[:, 1], linestyle='--', color='tab:green',
                  label='expert')

    axes.plot(trace.robot[:, 0], trace.robot[:, 1], color='tab:blue', label='robot')
    axes.plot(world.goal.x, world.goal.y, marker='*', markersize=12, color='tab:red')
    axes.set_aspect('equal')
    axes.legend(loc='upper left')

    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)

    figure.savefig(path, format='svg')
    return path


def _record_frame(record):
    return SensorFrame(
        scan=np.asarray(record['scan']),
        raster=np.asarray(record['raster']),
        goal=Pose.from_array(record['goal']),
    )


def evaluate_records(pipeline, records):
    """Error of the selected candidate against the expert on planner records.

    Returns:
        pandas.DataFrame:
            One row per record with ``family``, ``mse`` and ``hausdorff``.
    """
    if not len(records):
        raise ValueError('Cannot evaluate an empty set of records')

    rows = []
    for record in records:
        selection = pipeline.plan(_record_frame(record))
        chosen = selection.candidates[selection.index]
        expert = np.asarray(record['expert'])
        rows.append({
            'family': record['kind'],
            'mse': mse(expert, chosen),
            'hausdorff': hausdorff(expert, chosen),
        })

    return pd.DataFrame(rows)


def _variant_scores(pipeline, records):
    scores = {}
    for variant, ablate in VARIANTS.items():
        pipeline.set_ablation(ablate)
        scores[variant] = evaluate_records(pipeline, records)[['mse', 'hausdorff']].mean()

    pipeline.set_ablation(())
    return scores


def updated_pipeline(pipeline, records, world_factory, state=None, symmetric=True):
    """Copy of ``pipeline`` after one lifelong update on ``records``.

    Args:
        world_factory (callable):
            ``world_factory(record)`` regenerating the world of a record, used
            to caption its frame.

    Returns:
        tuple:
            ``(pipeline, UpdateRecord)``. The original pipeline is untouched.
    """
    model = copy.deepcopy(pipeline.context_model)
    state = copy.copy(state) if state else UpdateState(iteration=model.iteration)
    updater = LifelongUpdater(model, pipeline.database, state, len(records),
                              symmetric=symmetric)
    frames = [BufferedFrame(np.asarray(record['raster']), world_factory(record))
              for record in records]
    frames, captions = caption_batch(frames, updater.captioner)
    if not frames:
        raise ValueError('None of the update frames could be captioned')

    record = updater.apply_update(np.stack([frame.raster for frame in frames]), captions)
    updated = SocialNavPipeline(model, pipeline.planner, pipeline.selector, updater.database,
                                retrieval_threshold=pipeline.retrieval_threshold,
                                controller=pipeline.controller)
    return updated, record


def evaluate_ablations(pipeline, records, update_records=None, world_factory=None,
                       buffer_size=50, state=None):
    """Mean error per scenario family and variant, before and after a lifelong update.

    Args:
        pipeline (SocialNavPipeline):
            Trained pipeline.
        records (list):
            Held out planner records.
        update_records (list):
            Records whose frames feed the update of each family. The first
            ``buffer_size`` records of the family are used. Defaults to
            ``records``.
        world_factory (callable):
            ``world_factory(record)`` regenerating a record's world. Without
            it the ``after`` columns repeat the ``before`` ones.

    Returns:
        pandas.DataFrame:
            Columns ``family``, ``variant``, ``before_mse``,
            ``before_hausdorff``, ``after_mse`` and ``after_hausdorff``.
    """
    if not len(records):
        raise ValueError('Cannot evaluate an empty set of records')

    update_records = records if update_records is None else update_records
    rows = []
    for family in sorted({record['kind'] for record in records}):
        family_records = [record for record in records if record['kind'] == family]
        LOGGER.info('Evaluating %s records of %s', len(family_records), family)
        before = _variant_scores(pipeline, family_records)

        after = before
        pool = [record for record in update_records if record['kind'] == family]
        if world_factory is not None and pool:
            updated, _ = updated_pipeline(pipeline, pool[:buffer_size], world_factory, state)
            after = _variant_scores(updated, family_records)

        for variant in VARIANTS:
            rows.append([
                family,
                variant,
                before[variant]['mse'],
                before[variant]['hausdorff'],
                after[variant]['mse'],
                after[variant]['hausdorff'],
            ])

    return pd.DataFrame(rows, columns=TABLE_COLUMNS)
