"""Tests for `socialnav.datasets` and `socialnav.loaders` modules."""
import os
import tempfile
from unittest import TestCase

import numpy as np
import pytest

from socialnav.datasets import (
    DatasetError, build_dsc, build_dtpn, dump, format_record, load_dataset, sample_world,
    write_dataset)
from socialnav.loaders import RecordLoader
from socialnav.loaders.records import (
    MANIFEST_FILE, RECORDS_FILE, decode_record, encode_record, read_manifest, write_manifest)


def _records(episodes=10, frames=2):
    rng = np.random.default_rng(0)
    return [
        {
            'kind': 'narrow_hallway',
            'episode': episode,
            'frame': frame,
            'seed': episode,
            'raster': (rng.random((4, 8, 8)) < 0.2).astype(np.uint8),
            'scan': rng.random(180).astype(np.float32),
            'goal': np.array([3.0, 0.0, 0.0], dtype=np.float32),
            'expert': rng.normal(size=(10, 3)).astype(np.float32),
        }
        for episode in range(episodes)
        for frame in range(frames)
    ]


def test_encode_decode_record():
    record = {
        'long': 'the robot is in a narrow hallway .',
        'episode': 3,
        'ratio': 0.25,
        'stopped': True,
        'raster': np.eye(4, dtype=np.uint8)[None],
        'expert': np.arange(6, dtype=np.float32).reshape(2, 3),
    }

    decoded = decode_record(encode_record(record))

    assert decoded['long'] == record['long']
    assert decoded['episode'] == 3
    assert decoded['ratio'] == 0.25
    assert decoded['stopped'] is True
    np.testing.assert_array_equal(decoded['raster'], record['raster'])
    assert decoded['expert'].dtype == np.float32
    assert decoded['raster'].shape == (1, 4, 4)


def test_encode_rejects_objects():
    with pytest.raises(DatasetError):
        encode_record({'bad': np.array([object()])})


def test_decode_rejects_trailing_bytes():
    with pytest.raises(DatasetError):
        decode_record(encode_record({'episode': 1}) + b'\x00')


def test_manifest(tmp_path):
    path = str(tmp_path / MANIFEST_FILE)
    manifest = {
        'kind': 'sc',
        'count': 4,
        'seed': 2,
        'schema_version': 1,
        'train': (0, 2),
        'val': (2, 3),
        'test': (3, 4),
        'sha256': 'abc',
        'config': {'dt': 0.1},
    }

    write_manifest(path, manifest)

    assert read_manifest(path) == manifest


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetError):
        read_manifest(str(tmp_path / MANIFEST_FILE))


class TestWrittenDataset(TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.folder = self._tmp.name
        self.records = _records()
        self.manifest = write_dataset(self.folder, 'tpn', self.records, seed=5,
                                      config={'dt': 0.1})

    def tearDown(self):
        self._tmp.cleanup()

    def test_manifest(self):
        assert self.manifest['count'] == 20
        assert self.manifest['train'] == (0, 16)
        assert self.manifest['config'] == {'dt': 0.1}
        assert read_manifest(os.path.join(self.folder, MANIFEST_FILE)) == self.manifest

    def test_load(self):
        records = load_dataset(self.folder, 'tpn')

        assert len(records) == 20
        np.testing.assert_array_equal(records[7]['expert'], self.records[7]['expert'])
        assert records[7]['kind'] == 'narrow_hallway'

    def test_load_split(self):
        records = load_dataset(self.folder, split='test')

        assert [record['episode'] for record in records] == [9, 9]

    def test_wrong_kind(self):
        with pytest.raises(DatasetError):
            load_dataset(self.folder, 'sc')

    def test_hash_mismatch(self):
        path = os.path.join(self.folder, RECORDS_FILE)
        with open(path, 'r+b') as records:
            records.seek(-1, os.SEEK_END)
            last = records.read(1)
            records.seek(-1, os.SEEK_END)
            records.write(bytes([last[0] ^ 0xFF]))

        with pytest.raises(DatasetError):
            load_dataset(self.folder)

        assert len(RecordLoader(self.folder, verify_hash=False).load()) == 20

    def test_get(self):
        loader = RecordLoader(self.folder)

        assert loader.get(3)['frame'] == 1
        with pytest.raises(IndexError):
            loader.get(20)

    def test_dump(self):
        text = dump(self.folder, 0)

        assert 'kind: narrow_hallway' in text
        assert 'raster: uint8 (4, 8, 8)' in text


def test_write_dataset_unknown_kind(tmp_path):
    with pytest.raises(ValueError):
        write_dataset(str(tmp_path), 'images', _records(1, 1), seed=0)


def test_format_record():
    text = format_record({'action': 'proceed', 'goal': np.zeros(3, dtype=np.float32)})

    assert text.splitlines()[0] == 'action: proceed'
    assert text.splitlines()[1] == 'goal: float32 (3,)'


def test_build_rejects_empty():
    with pytest.raises(ValueError):
        build_dsc(0, seed=0)


@pytest.mark.slow
def test_build_dsc_is_deterministic():
    first = build_dsc(5, seed=1, frames=3, workers=1)
    second = build_dsc(5, seed=1, frames=3, workers=2)

    assert len(first) == 5
    assert [record['episode'] for record in first] == [0, 0, 0, 1, 1]
    for one, two in zip(first, second):
        assert one['long'] == two['long']
        assert one['action'] == two['action']
        np.testing.assert_array_equal(one['raster'], two['raster'])


@pytest.mark.slow
def test_build_dtpn_records():
    records = build_dtpn(3, seed=0, frames=3)

    for record in records:
        assert record['raster'].shape == (4, 64, 64)
        assert record['raster'].dtype == np.uint8
        assert record['scan'].shape == (180,)
        assert record['expert'].shape == (10, 3)
        np.testing.assert_array_equal(record['expert'][0], [0.0, 0.0, 0.0])


@pytest.mark.slow
def test_sample_world_matches_records():
    record = build_dtpn(2, seed=0, frames=2)[1]

    world = sample_world(record['kind'], record['seed'], record['frame'])

    assert world.kind == record['kind']
    assert world.time > 0
