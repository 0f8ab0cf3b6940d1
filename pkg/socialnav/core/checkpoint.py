# -*- coding: utf-8 -*-

"""HDF5 checkpoint container.

A checkpoint file holds a ``format_version`` root attribute, a JSON
``metadata`` attribute, a ``tensors`` group with one dataset per named array
and an optional ``strings`` group with UTF-8 string tables. Datasets are
written without timestamps so identical content produces identical files.
"""

import json
import logging
import os

import h5py
import numpy as np
import torch

LOGGER = logging.getLogger(__name__)

FORMAT_VERSION = 1


def save_checkpoint(path, tensors, metadata=None, strings=None):
    """Write named arrays, metadata and string tables to ``path``.

    Args:
        path (str):
            Destination ``.h5`` file.
        tensors (dict):
            Mapping of names to numpy arrays or torch tensors.
        metadata (dict):
            JSON serializable metadata.
        strings (dict):
            Mapping of names to lists of strings.
    """
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)

    with h5py.File(path, 'w', track_order=True) as h5:
        h5.attrs['format_version'] = FORMAT_VERSION
        h5.attrs['metadata'] = json.dumps(metadata or {}, sort_keys=True)

        group = h5.create_group('tensors', track_order=True)
        for name in sorted(tensors):
            value = tensors[name]
            if isinstance(value, torch.Tensor):
                value = value.detach().cpu().numpy()

            group.create_dataset(name, data=np.asarray(value), track_times=False)

        table = h5.create_group('strings', track_order=True)
        for name in sorted(strings or {}):
            values = np.array(list(strings[name]), dtype=object)
            table.create_dataset(name, data=values, dtype=h5py.string_dtype('utf-8'),
                                 shape=(len(values),), track_times=False)

    LOGGER.debug('Saved checkpoint %s with %s tensors', path, len(tensors))


def load_checkpoint(path):
    """Read a checkpoint written by ``save_checkpoint``.

    Returns:
        tuple:
            ``(tensors, metadata, strings)`` where ``tensors`` maps names to numpy
            arrays and ``strings`` maps names to lists of ``str``.
    """
    if not os.path.exists(path):
        raise FileNotFoundError('Checkpoint not found: {}'.format(path))

    with h5py.File(path, 'r') as h5:
        version = int(h5.attrs.get('format_version', -1))
        if version != FORMAT_VERSION:
            raise ValueError('Unsupported checkpoint format version {} in {}'.format(
                version, path))

        metadata = json.loads(h5.attrs['metadata'])
        tensors = {name: dataset[()] for name, dataset in h5['tensors'].items()}
        strings = {
            name: list(dataset.asstr()[()]) if len(dataset) else []
            for name, dataset in h5['strings'].items()
        }

    return tensors, metadata, strings


def module_tensors(module, prefix=''):
    return {
        prefix + name: value.detach().cpu().numpy()
        for name, value in module.state_dict().items()
    }


def load_module_tensors(module, tensors, prefix=''):
    state = {
        name[len(prefix):]: torch.from_numpy(np.array(value))
        for name, value in tensors.items()
        if name.startswith(prefix)
    }
    module.load_state_dict(state)
