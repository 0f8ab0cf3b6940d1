"""Tests for `socialnav.results` module."""
import pandas as pd

from socialnav.results import format_table, summarize, write_results


def _table(offset=0.0):
    return pd.DataFrame({
        'family': ['narrow_hallway', 'narrow_hallway'],
        'variant': ['full', 'w/o E_T'],
        'before_mse': [0.1 + offset, 0.3 + offset],
    })


def test_write_results(tmp_path):
    path = str(tmp_path / 'tables' / 'ablations.csv')

    assert write_results(_table(), path) == path
    pd.testing.assert_frame_equal(pd.read_csv(path), _table())


def test_summarize_tables():
    summary = summarize([_table(), _table(0.2)])

    assert summary['variant'].tolist() == ['full', 'w/o E_T']
    assert summary['before_mse'].round(6).tolist() == [0.2, 0.4]


def test_summarize_keeps_variant_order():
    table = pd.concat([_table(), _table(0.2)], ignore_index=True)
    table['family'] = ['narrow_hallway', 'narrow_hallway', 'blind_corner', 'blind_corner']
    table['variant'] = ['w/o E_T', 'full', 'w/o E_T', 'full']

    summary = summarize(table)

    assert summary['variant'].tolist() == ['w/o E_T', 'full']
    assert 'family' not in summary
    assert summary['before_mse'].round(6).tolist() == [0.2, 0.4]


def test_format_table():
    lines = format_table(_table()).splitlines()

    assert lines[0].startswith('| family')
    assert 'variant' in lines[0]
    assert '0.1000' in lines[2]
