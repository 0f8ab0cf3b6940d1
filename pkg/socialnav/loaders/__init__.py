from socialnav.loaders.records import DatasetError, RecordLoader

__all__ = (
    'DatasetError',
    'RecordLoader',
)
