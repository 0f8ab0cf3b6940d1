import json
import logging
import os
import struct

import numpy as np

from socialnav.utils import file_sha256

LOGGER = logging.getLogger(__name__)

MAGIC = b'SNREC'
SCHEMA_VERSION = 1
RECORDS_FILE = 'records.bin'
MANIFEST_FILE = 'manifest.txt'
SPLITS = ('train', 'val', 'test')


class DatasetError(ValueError):
    """Raised when stored records do not match their manifest or schema."""


def _as_array(value):
    if isinstance(value, str):
        return np.array(value)

    if isinstance(value, (bool, np.bool_)):
        return np.array(value, dtype=np.bool_)

    if isinstance(value, int):
        return np.array(value, dtype=np.int64)

    if isinstance(value, float):
        return np.array(value, dtype=np.float64)

    return np.asarray(value)


def encode_record(record):
    """Serialize a ``{name: value}`` record into a length-free payload.

    Each field is stored as its UTF-8 name, its numpy dtype string, its shape
    and its raw C-order bytes.
    """
    chunks = [struct.pack('<H', len(record))]
    for name, value in record.items():
        array = _as_array(value)
        if array.dtype.hasobject:
            raise DatasetError('Field {} holds Python objects'.format(name))

        encoded_name = name.encode('utf-8')
        dtype = array.dtype.str.encode('ascii')
        chunks.append(struct.pack('<H', len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(struct.pack('<B', len(dtype)))
        chunks.append(dtype)
        chunks.append(struct.pack('<B', array.ndim))
        chunks.append(struct.pack('<{}I'.format(array.ndim), *array.shape))
        chunks.append(array.tobytes())

    return b''.join(chunks)


def _from_array(array):
    if array.ndim:
        return array

    if array.dtype.kind == 'U':
        return str(array)

    return array.item()


def decode_record(payload):
    view = memoryview(payload)
    (count,) = struct.unpack_from('<H', view, 0)
    offset = 2
    record = {}
    for _ in range(count):
        (name_length,) = struct.unpack_from('<H', view, offset)
        offset += 2
        name = bytes(view[offset:offset + name_length]).decode('utf-8')
        offset += name_length
        (dtype_length,) = struct.unpack_from('<B', view, offset)
        offset += 1
        dtype = np.dtype(bytes(view[offset:offset + dtype_length]).decode('ascii'))
        offset += dtype_length
        (ndim,) = struct.unpack_from('<B', view, offset)
        offset += 1
        shape = struct.unpack_from('<{}I'.format(ndim), view, offset)
        offset += 4 * ndim
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        array = np.frombuffer(view[offset:offset + size], dtype=dtype).reshape(shape).copy()
        offset += size
        record[name] = _from_array(array)

    if offset != len(payload):
        raise DatasetError('Record payload has {} trailing bytes'.format(len(payload) - offset))

    return record


def write_records(path, records):
    """Write records with the magic header and length prefixes. Returns the count."""
    count = 0
    with open(path, 'wb') as target:
        target.write(MAGIC)
        target.write(struct.pack('<I', SCHEMA_VERSION))
        for record in records:
            payload = encode_record(record)
            target.write(struct.pack('<Q', len(payload)))
            target.write(payload)
            count += 1

    return count


def iter_records(path):
    """Stream the records stored in ``path``."""
    with open(path, 'rb') as source:
        if source.read(len(MAGIC)) != MAGIC:
            raise DatasetError('{} is not a records file'.format(path))

        (version,) = struct.unpack('<I', source.read(4))
        if version != SCHEMA_VERSION:
            raise DatasetError('Unsupported schema version {} in {}'.format(version, path))

        while True:
            header = source.read(8)
            if not header:
                return

            if len(header) != 8:
                raise DatasetError('Truncated record header in {}'.format(path))

            (length,) = struct.unpack('<Q', header)
            payload = source.read(length)
            if len(payload) != length:
                raise DatasetError('Truncated record in {}'.format(path))

            yield decode_record(payload)


def write_manifest(path, manifest):
    lines = []
    for key, value in manifest.items():
        if key in SPLITS:
            value = '{} {}'.format(*value)
        elif isinstance(value, dict):
            value = json.dumps(value, sort_keys=True)

        lines.append('{}: {}'.format(key, value))

    with open(path, 'w') as target:
        target.write('\n'.join(lines) + '\n')


def read_manifest(path):
    """Parse a ``key: value`` manifest into a dict with typed values."""
    if not os.path.exists(path):
        raise DatasetError('Manifest not found: {}'.format(path))

    manifest = {}
    with open(path) as source:
        for line in source:
            line = line.strip()
            if not line or line.startswith('#'):
                continue

            key, _, value = line.partition(':')
            key, value = key.strip(), value.strip()
            if key in SPLITS:
                start, stop = value.split()
                manifest[key] = (int(start), int(stop))
            elif key in ('count', 'seed', 'schema_version'):
                manifest[key] = int(value)
            elif key == 'config':
                manifest[key] = json.loads(value)
            else:
                manifest[key] = value

    return manifest


class RecordLoader:
    """Load the records of a dataset folder.

    The RecordLoader reads ``manifest.txt`` and streams ``records.bin``,
    checking the schema version, the record count and, optionally, the
    content hash against the manifest.

    Args:
        folder (str):
            Dataset folder holding ``manifest.txt`` and ``records.bin``.
        verify_hash (bool):
            Whether to compare the sha256 of ``records.bin`` with the manifest.
            Defaults to ``True``.
    """

    def __init__(self, folder, verify_hash=True):
        self._folder = folder
        self._verify_hash = verify_hash
        self.manifest = read_manifest(os.path.join(folder, MANIFEST_FILE))
        if self.manifest.get('schema_version') != SCHEMA_VERSION:
            raise DatasetError('Unsupported schema version {} in {}'.format(
                self.manifest.get('schema_version'), folder))

    @property
    def records_path(self):
        return os.path.join(self._folder, RECORDS_FILE)

    def __len__(self):
        return self.manifest['count']

    def __iter__(self):
        return iter_records(self.records_path)

    def load(self, split=None):
        """Load every record, or only those of ``split``.

        Returns:
            list:
                Records as dictionaries.
        """
        if split is not None and split not in SPLITS:
            raise DatasetError('Unknown split {!r}, expected one of {}'.format(split, SPLITS))

        if self._verify_hash and 'sha256' in self.manifest:
            digest = file_sha256(self.records_path)
            if digest != self.manifest['sha256']:
                raise DatasetError('Hash mismatch for {}'.format(self.records_path))

        records = list(self)
        if len(records) != self.manifest['count']:
            raise DatasetError('Manifest announces {} records, found {}'.format(
                self.manifest['count'], len(records)))

        LOGGER.info('Loaded %s records from %s', len(records), self._folder)
        if split is None:
            return records

        start, stop = self.manifest[split]
        return records[start:stop]

    def get(self, index):
        """Record number ``index`` without loading the rest."""
        if not 0 <= index < len(self):
            raise IndexError('Record {} out of range [0, {})'.format(index, len(self)))

        for position, record in enumerate(self):
            if position == index:
                return record
