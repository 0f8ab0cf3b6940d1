# -*- coding: utf-8 -*-

import argparse
import logging
import os
import sys
import warnings

import numpy as np
import pandas as pd
import tabulate

from socialnav.benchmark import (
    evaluate_ablations, evaluate_scenario, plot_episode, run_episode, updated_pipeline)
from socialnav.config import RunConfig, default_output_root, parse_assignments
from socialnav.context import (
    ContextDatabase, SocialContextModel, build_database, retrieval_accuracy, sample_captions,
    train_scclip)
from socialnav.datasets import (
    DATASET_KINDS, build_dataset, dump, load_dataset, sample_world)
from socialnav.geometry import write_trajectory
from socialnav.lifelong import LifelongUpdater, UpdateState
from socialnav.loaders.records import SPLITS
from socialnav.pipeline import CHECKPOINTS, SocialNavPipeline
from socialnav.planner import TrajectoryPlanner, prepare_samples, train_tpn
from socialnav.results import format_table, summarize, write_results
from socialnav.selector import SelectionHead, selection_accuracy, train_tsm
from socialnav.sim.captions import CaptionPair
from socialnav.sim.scenarios import SCENARIOS, make_scenario
from socialnav.utils import logging_setup, seed_everything

LOGGER = logging.getLogger(__name__)

STAGE_DEPENDENCIES = {
    'scclip': (),
    'tpn': ('context_model',),
    'tsm': ('context_model', 'planner'),
}


class UsageError(ValueError):
    """Raised for command line input that cannot be acted upon."""


def _setup_logging(args):
    logging_setup(args.verbose, args.logfile)
    logging.getLogger('matplotlib').setLevel(logging.ERROR)
    logging.getLogger('h5py').setLevel(logging.ERROR)


def _load_config(args, flags=None):
    try:
        config = RunConfig()
        if args.config:
            config = RunConfig.from_file(args.config, config)

        values = {key: value for key, value in (flags or {}).items() if value is not None}
        values.update(parse_assignments(args.set))
        if args.seed is not None:
            values['seed'] = args.seed

        return config.update(values)
    except ValueError as error:
        raise UsageError(str(error)) from error


def _output(args, name):
    return args.out or os.path.join(default_output_root(), name)


def _checkpoint(folder, component):
    return os.path.join(folder, CHECKPOINTS[component])


def _require_checkpoints(folder, components):
    missing = [
        _checkpoint(folder, component)
        for component in components
        if not os.path.exists(_checkpoint(folder, component))
    ]
    if missing:
        raise UsageError('Missing checkpoints {}: train the earlier stages first'.format(
            ', '.join(missing)))


def _gen_data(args):
    config = _load_config(args)
    out = _output(args, 'data_{}'.format(args.kind))
    count = args.n or getattr(config, 'd{}_size'.format(args.kind))
    planner = context_model = None
    if args.kind == 'tsm':
        _require_checkpoints(args.checkpoints, ('context_model', 'planner'))
        context_model = SocialContextModel.load(_checkpoint(args.checkpoints, 'context_model'))
        planner = TrajectoryPlanner.load(_checkpoint(args.checkpoints, 'planner'))

    manifest = build_dataset(
        args.kind, out, count, config.seed, planner=planner, context_model=context_model,
        config={'frames_per_episode': config.frames_per_episode, 'dt': config.dt},
        frames=config.frames_per_episode, replan_every=config.replan_every, dt=config.dt,
        workers=config.workers)
    config.write(out)
    print('{} {} records written to {} (sha256 {})'.format(
        manifest['count'], args.kind, out, manifest['sha256']))


def _split(folder, kind, split):
    records = load_dataset(folder, kind, split)
    if not records:
        raise UsageError('The {} split of {} is empty'.format(split, folder))

    return records


def _train_scclip(config, settings, args, out):
    seed_everything(config.seed)
    model = SocialContextModel(embedding_dim=config.embedding_dim,
                               components=config.pce_components)
    train = _split(args.data, 'sc', 'train')
    val = load_dataset(args.data, 'sc', 'val')
    history = train_scclip(model, train, val, patience=config.patience or None,
                           seed=config.seed, verbose=args.verbose > 0, **settings)
    if val:
        LOGGER.info('Validation retrieval accuracy %.3f', retrieval_accuracy(model, val))

    model.save(_checkpoint(out, 'context_model'))
    captions = sample_captions(train, config.database_size, config.seed)
    build_database(captions, model).save(_checkpoint(out, 'database'))
    return history


def _train_tpn(config, settings, args, out):
    context_model = SocialContextModel.load(_checkpoint(out, 'context_model'))
    seed_everything(config.seed)
    planner = TrajectoryPlanner(
        image_width=context_model.hyperparameters['width'], channels=config.channels,
        heads=config.heads, candidates=config.candidates)
    train = prepare_samples(_split(args.data, 'tpn', 'train'), context_model)
    val = prepare_samples(load_dataset(args.data, 'tpn', 'val'), context_model)
    history = train_tpn(planner, train, val, patience=config.patience or None,
                        seed=config.seed, winner_only=config.winner_only,
                        verbose=args.verbose > 0, **settings)
    planner.save(_checkpoint(out, 'planner'))
    return history


def _train_tsm(config, settings, args, out):
    seed_everything(config.seed)
    head = SelectionHead(embedding_dim=config.embedding_dim, candidates=config.candidates)
    train = _split(args.data, 'tsm', 'train')
    val = load_dataset(args.data, 'tsm', 'val')
    history = train_tsm(head, train, val, patience=config.patience or None, seed=config.seed,
                        verbose=args.verbose > 0, **settings)
    if val:
        LOGGER.info('Validation selection accuracy %.3f', selection_accuracy(head, val))

    head.save(_checkpoint(out, 'selector'))
    return history


TRAINERS = {
    'scclip': _train_scclip,
    'tpn': _train_tpn,
    'tsm': _train_tsm,
}


def _train(args):
    flags = {
        '{}_batch_size'.format(args.stage): args.batch_size,
        '{}_lr'.format(args.stage): args.lr,
        '{}_weight_decay'.format(args.stage): args.weight_decay,
        '{}_epochs'.format(args.stage): args.epochs,
    }
    config = _load_config(args, flags)
    out = _output(args, 'checkpoints')
    _require_checkpoints(out, STAGE_DEPENDENCIES[args.stage])

    os.makedirs(out, exist_ok=True)
    history = TRAINERS[args.stage](config, config.stage(args.stage), args, out)
    history.to_csv(os.path.join(out, '{}_history.csv'.format(args.stage)), index=False)
    config.write(out)

    best = history.loc[history['val_loss'].fillna(history['train_loss']).idxmin()]
    print('{} trained for {} epochs, best epoch {} (train {:.6f}, val {:.6f})'.format(
        args.stage, len(history), int(best['epoch']), best['train_loss'], best['val_loss']))


def _ablations(args):
    return [name for name in ('ei', 'et', 'el') if getattr(args, 'ablate_' + name)]


def _run_episode(args):
    config = _load_config(args)
    scenario = args.scenario or config.scenario
    if scenario not in SCENARIOS:
        raise UsageError('Unknown scenario {!r}, choose among {}'.format(scenario, SCENARIOS))

    _require_checkpoints(args.checkpoints, CHECKPOINTS)
    out = _output(args, 'episode_{}_{}'.format(scenario, config.seed))
    os.makedirs(out, exist_ok=True)

    pipeline = SocialNavPipeline.load(args.checkpoints, _ablations(args),
                                      config.retrieval_threshold)
    updater = None
    if args.llu:
        state = UpdateState(pipeline.context_model.iteration, config.llu_mu, config.llu_lr,
                            config.llu_steps, config.llu_weight_decay)
        updater = LifelongUpdater(pipeline.context_model, pipeline.database, state,
                                  config.buffer_size, symmetric=config.llu_symmetric,
                                  log_path=os.path.join(out, 'llu.log'))

    world = make_scenario(scenario, config.seed, config.dt)
    initial = world.copy()
    result = run_episode(pipeline, world, config.max_steps, config.replan_every, updater)

    write_trajectory(result.trace.trajectory(), os.path.join(out, 'trajectory.txt'))
    pd.DataFrame(result.trace.command_log()).to_csv(
        os.path.join(out, 'commands.txt'), sep=' ', header=False, index=False,
        float_format='%.6f')
    pipeline.write_selections(os.path.join(out, 'selections.txt'))
    plot_episode(os.path.join(out, 'episode.svg'), initial, result.trace, result.expert)

    metrics = pd.DataFrame([dict(result.metrics, scenario=scenario, seed=config.seed)])
    write_results(metrics, os.path.join(out, 'metrics.csv'))
    if result.update is not None and result.update.applied:
        pipeline.context_model.save(_checkpoint(out, 'context_model'))
        pipeline.database.save(_checkpoint(out, 'database'))

    config.write(out)
    print(tabulate.tabulate(metrics, tablefmt='github', headers=metrics.columns,
                            showindex=False))


def _record_world(config):
    def world_factory(record):
        return sample_world(record['kind'], int(record['seed']), int(record['frame']),
                            config.replan_every, config.dt)

    return world_factory


def _eval(args):
    config = _load_config(args)
    _require_checkpoints(args.checkpoints, CHECKPOINTS)
    records = load_dataset(args.data, 'tpn', args.split)
    if not records:
        raise UsageError('No records in the {} split of {}'.format(args.split, args.data))

    if args.family:
        records = [record for record in records if record['kind'] == args.family]
        if not records:
            raise UsageError('No {} records in {}'.format(args.family, args.data))

    pipeline = SocialNavPipeline.load(args.checkpoints,
                                      retrieval_threshold=config.retrieval_threshold)
    world_factory = update_records = None
    if args.llu:
        world_factory = _record_world(config)
        update_records = load_dataset(args.data, 'tpn', args.update_split)

    state = UpdateState(pipeline.context_model.iteration, config.llu_mu, config.llu_lr,
                        config.llu_steps, config.llu_weight_decay)
    table = evaluate_ablations(pipeline, records, update_records, world_factory,
                               config.buffer_size, state)

    out = _output(args, 'evaluation')
    write_results(table, os.path.join(out, 'ablations.csv'))
    summary = summarize(table)
    write_results(summary, os.path.join(out, 'summary.csv'))
    if args.episodes:
        seeds = range(config.seed, config.seed + args.episodes)
        kinds = [args.family] if args.family else SCENARIOS
        episodes = pd.concat([
            evaluate_scenario(pipeline, kind, seeds, config.max_steps, config.replan_every,
                              config.dt)
            for kind in kinds
        ], ignore_index=True)
        write_results(episodes, os.path.join(out, 'episodes.csv'))

    config.write(out)
    print(format_table(table))
    print()
    print('Mean over families:')
    print(format_table(summary))


def _record_captions(records, config):
    if all('long' in record for record in records):
        return [CaptionPair(record['long'], record['short'], record['action'])
                for record in records], None

    return None, _record_world(config)


def _llu_update(args):
    config = _load_config(args)
    _require_checkpoints(args.checkpoints, ('context_model', 'database'))
    records = load_dataset(args.data, split=args.split)[:config.buffer_size]
    if not records:
        raise UsageError('No records in the {} split of {}'.format(args.split, args.data))

    pipeline = SocialNavPipeline(
        SocialContextModel.load(_checkpoint(args.checkpoints, 'context_model')),
        database=ContextDatabase.load(_checkpoint(args.checkpoints, 'database')))
    state = UpdateState(pipeline.context_model.iteration, config.llu_mu, config.llu_lr,
                        config.llu_steps, config.llu_weight_decay)
    log_path = os.path.join(args.checkpoints, 'llu.log')

    captions, world_factory = _record_captions(records, config)
    if captions is not None:
        updater = LifelongUpdater(pipeline.context_model, pipeline.database, state,
                                  len(records), symmetric=config.llu_symmetric,
                                  log_path=log_path)
        rasters = np.stack([record['raster'] for record in records])
        update = updater.apply_update(rasters, captions)
        model, database = updater.model, updater.database
    else:
        updated, update = updated_pipeline(pipeline, records, world_factory, state,
                                           config.llu_symmetric)
        model, database = updated.context_model, updated.database

    if update.applied:
        model.save(_checkpoint(args.checkpoints, 'context_model'))
        database.save(_checkpoint(args.checkpoints, 'database'))

    print('Update {} on {} frames: loss {:.6f} -> {:.6f} ({})'.format(
        update.iteration, update.batch_size, update.pre_loss, update.post_loss,
        'applied' if update.applied else 'rolled back'))


def _dump(args):
    try:
        print(dump(args.data, args.index))
    except IndexError as error:
        raise UsageError(str(error)) from error


def _add_common(parser):
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='Be verbose. Use -vv for increased verbosity.')
    parser.add_argument('-l', '--logfile',
                        help='Log file.')
    parser.add_argument('-c', '--config',
                        help='Configuration file with key = value lines.')
    parser.add_argument('-s', '--set', action='append', metavar='KEY=VALUE',
                        help='Override a configuration value. Can be repeated.')
    parser.add_argument('--seed', type=int,
                        help='Random seed, overriding the configuration.')
    parser.add_argument('-o', '--out',
                        help='Output folder. Defaults to a folder under $SOCIALNAV_OUTPUT.')


def _get_parser():
    parser = argparse.ArgumentParser(description='Social navigation command line interface.')
    parser.set_defaults(action=None)
    action = parser.add_subparsers(title='action')
    action.required = True

    gen_data = action.add_parser('gen-data', help='Generate a dataset from expert episodes')
    gen_data.set_defaults(action=_gen_data)
    _add_common(gen_data)
    gen_data.add_argument('-k', '--kind', required=True, choices=DATASET_KINDS,
                          help='Dataset to build.')
    gen_data.add_argument('-n', '--n', type=int,
                          help='Number of records. Defaults to the configured size.')
    gen_data.add_argument('--checkpoints', default=os.path.join(default_output_root(),
                                                                'checkpoints'),
                          help='Checkpoint folder, needed for tsm datasets.')

    train = action.add_parser('train', help='Train one stage of the pipeline')
    train.set_defaults(action=_train)
    _add_common(train)
    train.add_argument('stage', choices=tuple(TRAINERS), help='Stage to train.')
    train.add_argument('-d', '--data', required=True, help='Dataset folder.')
    train.add_argument('-b', '--batch-size', type=int, help='Batch size.')
    train.add_argument('--lr', type=float, help='Learning rate.')
    train.add_argument('--weight-decay', type=float, help='Weight decay.')
    train.add_argument('-e', '--epochs', type=int, help='Number of epochs.')

    episode = action.add_parser('run-episode', help='Run one closed loop episode')
    episode.set_defaults(action=_run_episode)
    _add_common(episode)
    episode.add_argument('checkpoints', help='Checkpoint folder.')
    episode.add_argument('-S', '--scenario', help='Scenario family.')
    episode.add_argument('--ablate-ei', action='store_true',
                         help='Replace the image embedding with zeros.')
    episode.add_argument('--ablate-et', action='store_true',
                         help='Replace the retrieved text embedding with zeros.')
    episode.add_argument('--ablate-el', action='store_true',
                         help='Replace the LiDAR embedding with zeros.')
    episode.add_argument('--llu', action='store_true',
                         help='Buffer frames and update the encoders after the episode.')

    evaluate = action.add_parser('eval', help='Evaluate ablations on held out records')
    evaluate.set_defaults(action=_eval)
    _add_common(evaluate)
    evaluate.add_argument('checkpoints', help='Checkpoint folder.')
    evaluate.add_argument('-d', '--data', required=True, help='Planner dataset folder.')
    evaluate.add_argument('--split', default='test', choices=SPLITS, help='Split to evaluate.')
    evaluate.add_argument('-f', '--family', choices=SCENARIOS,
                          help='Only evaluate this scenario family.')
    evaluate.add_argument('--llu', action='store_true',
                          help='Also evaluate after one lifelong update per family.')
    evaluate.add_argument('--update-split', default='val', choices=SPLITS,
                          help='Split providing the update frames.')
    evaluate.add_argument('--episodes', type=int, default=0,
                          help='Closed loop episodes to run per scenario family.')

    llu = action.add_parser('llu-update', help='Run one lifelong update from stored frames')
    llu.set_defaults(action=_llu_update)
    _add_common(llu)
    llu.add_argument('checkpoints', help='Checkpoint folder, updated in place.')
    llu.add_argument('-d', '--data', required=True, help='Dataset folder.')
    llu.add_argument('--split', default='train', choices=SPLITS,
                     help='Split providing the frames.')

    dump_records = action.add_parser('dump', help='Print one dataset record')
    dump_records.set_defaults(action=_dump, verbose=0, logfile=None)
    dump_records.add_argument('data', help='Dataset folder.')
    dump_records.add_argument('index', type=int, help='Record index.')

    return parser


def main(argv=None):
    parser = _get_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_help()
        return 0

    args = parser.parse_args(argv)
    _setup_logging(args)
    try:
        args.action(args)
    except (UsageError, argparse.ArgumentError) as error:
        LOGGER.error('%s', error)
        print('error: {}'.format(error), file=sys.stderr)
        return 2
    except Exception as error:
        LOGGER.exception('Command %s failed', argv[0])
        print('{} failed: {}'.format(argv[0], error), file=sys.stderr)
        return 1

    return 0


if __name__ == '__main__':
    warnings.filterwarnings('ignore')
    sys.exit(main())
