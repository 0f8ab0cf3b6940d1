# -*- coding: utf-8 -*-

"""Flat run configuration shared by every command."""

import logging
import os
from dataclasses import asdict, dataclass, fields

LOGGER = logging.getLogger(__name__)

OUTPUT_ENV = 'SOCIALNAV_OUTPUT'
DEFAULT_OUTPUT = 'socialnav_output'
CONFIG_FILE = 'config.txt'
STAGES = ('scclip', 'tpn', 'tsm')
TRUE_VALUES = ('1', 'true', 'yes', 'on')
FALSE_VALUES = ('0', 'false', 'no', 'off')


def default_output_root():
    return os.environ.get(OUTPUT_ENV, os.path.join('.', DEFAULT_OUTPUT))


@dataclass
class RunConfig:
    """Every hyperparameter of a run, with desk-scale defaults."""

    seed: int = 0
    workers: int = 1
    scenario: str = 'narrow_hallway'
    max_steps: int = 600
    dt: float = 0.1
    replan_hz: float = 1.0
    retrieval_threshold: float = 0.2
    patience: int = 0

    scclip_batch_size: int = 256
    scclip_lr: float = 1e-4
    scclip_weight_decay: float = 0.01
    scclip_epochs: int = 100
    embedding_dim: int = 64
    pce_components: int = 8
    database_size: int = 256

    tpn_batch_size: int = 10
    tpn_lr: float = 8e-4
    tpn_weight_decay: float = 1e-4
    tpn_epochs: int = 500
    channels: int = 128
    heads: int = 32
    candidates: int = 5
    winner_only: bool = True

    tsm_batch_size: int = 128
    tsm_lr: float = 1e-5
    tsm_weight_decay: float = 1e-5
    tsm_epochs: int = 500

    buffer_size: int = 50
    llu_mu: float = 0.07
    llu_steps: int = 10
    llu_lr: float = 1e-5
    llu_weight_decay: float = 0.01
    llu_symmetric: bool = True

    dsc_size: int = 2000
    dtpn_size: int = 1000
    dtsm_size: int = 2000
    frames_per_episode: int = 20

    def __post_init__(self):
        self.validate()

    def validate(self):
        rates = [
            name for name in ('scclip_lr', 'tpn_lr', 'tsm_lr', 'llu_lr', 'llu_mu', 'dt',
                              'replan_hz')
            if not getattr(self, name) > 0
        ]
        if rates:
            raise ValueError('Configuration values must be positive: {}'.format(rates))

        counts = [
            name for name in ('max_steps', 'buffer_size', 'candidates', 'heads', 'channels',
                              'workers', 'frames_per_episode')
            if getattr(self, name) < 1
        ]
        if counts:
            raise ValueError('Configuration values must be at least 1: {}'.format(counts))

        if self.channels % self.heads:
            raise ValueError('channels ({}) must be divisible by heads ({})'.format(
                self.channels, self.heads))

    @property
    def replan_every(self):
        """Simulation steps between two planner calls."""
        return max(1, int(round(1.0 / (self.replan_hz * self.dt))))

    @classmethod
    def _coerce(cls, name, value):
        types = {field.name: field.type for field in fields(cls)}
        if name not in types:
            raise ValueError('Unknown configuration key {!r}'.format(name))

        kind = types[name]
        if kind is bool:
            if isinstance(value, bool):
                return value

            text = str(value).strip().lower()
            if text in TRUE_VALUES:
                return True

            if text in FALSE_VALUES:
                return False

            raise ValueError('Invalid boolean for {}: {!r}'.format(name, value))

        try:
            if kind is int and isinstance(value, str):
                return int(float(value)) if float(value).is_integer() else int(value)

            return kind(value)
        except (TypeError, ValueError):
            raise ValueError('Invalid value for {}: {!r}'.format(name, value))

    def update(self, values):
        """Return a copy with ``values`` applied on top of this configuration."""
        current = asdict(self)
        for name, value in values.items():
            current[name] = self._coerce(name, value)

        return type(self)(**current)

    def stage(self, stage):
        """Batch size, learning rate, weight decay and epochs of a training stage."""
        if stage not in STAGES:
            raise ValueError('Unknown training stage {!r}'.format(stage))

        return {
            key: getattr(self, '{}_{}'.format(stage, key))
            for key in ('batch_size', 'lr', 'weight_decay', 'epochs')
        }

    def to_text(self):
        lines = ['{} = {}'.format(key, value) for key, value in asdict(self).items()]
        return '\n'.join(lines) + '\n'

    def write(self, folder):
        os.makedirs(folder, exist_ok=True)
        path = os.path.join(folder, CONFIG_FILE)
        with open(path, 'w') as target:
            target.write(self.to_text())

        return path

    @classmethod
    def parse_text(cls, text):
        """``key = value`` lines, ``#`` starting a comment."""
        values = {}
        for number, line in enumerate(text.splitlines(), 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue

            key, separator, value = line.partition('=')
            if not separator:
                raise ValueError('Line {} is not a key = value pair: {!r}'.format(number, line))

            values[key.strip()] = value.strip()

        return values

    @classmethod
    def from_file(cls, path, base=None):
        with open(path) as source:
            values = cls.parse_text(source.read())

        LOGGER.debug('Read %s configuration values from %s', len(values), path)
        return (base or cls()).update(values)


def parse_assignments(assignments):
    """``['key=value', ...]`` to a dict."""
    values = {}
    for assignment in assignments or []:
        key, separator, value = assignment.partition('=')
        if not separator or not key.strip():
            raise ValueError('Expected key=value, got {!r}'.format(assignment))

        values[key.strip()] = value.strip()

    return values
