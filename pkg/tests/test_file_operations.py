"""Tests for output formatting and atomic writes."""

import csv
import io
import math

import pytest

from file_operations import (
    atomic_write_bytes,
    atomic_write_text,
    config_hash,
    format_duration,
    format_float,
    to_json_text,
    write_csv_text,
)


@pytest.mark.parametrize('seconds, expected', [
    (0.25, '250 ms'),
    (12.34, '12.3 s'),
    (245, '4 min 05 s'),
    (7260, '2 h 01 min'),
])
def test_format_duration(seconds, expected):
    assert format_duration(seconds) == expected


def test_format_float_round_trips():
    for value in (0.1, 1 / 3, 6.02214076e23, -2.5e-300, 5.0):
        assert float(format_float(value)) == value
    assert format_float(math.nan) == 'nan'
    assert format_float(-math.inf) == '-inf'


def test_csv_text_is_stable_and_parseable():
    rows = [(6, 1, 1 / 3, True), (6, 2, 2.0, False)]
    text = write_csv_text(('n', 'k', 'mean', 'ablated'), rows)
    assert text == write_csv_text(('n', 'k', 'mean', 'ablated'), rows)
    assert '\r' not in text
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert float(parsed[0]['mean']) == 1 / 3
    assert parsed[0]['ablated'] == 'true'
    assert parsed[1]['ablated'] == 'false'


def test_json_text_sorted():
    assert to_json_text({'b': 1, 'a': 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'


def test_config_hash_ignores_key_order():
    assert config_hash({'seed': 1, 'command': 'sweep'}) == config_hash({'command': 'sweep', 'seed': 1})
    assert config_hash({'seed': 1}) != config_hash({'seed': 2})
    assert len(config_hash({})) == 64


def test_atomic_write_replaces_and_cleans_up(tmp_path):
    target = tmp_path / 'out' / 'stats.csv'
    atomic_write_text(target, 'first\n')
    atomic_write_text(target, 'second\n')
    assert target.read_text(encoding='utf-8') == 'second\n'
    assert sorted(p.name for p in target.parent.iterdir()) == ['stats.csv']


def test_atomic_write_failure_leaves_no_file(tmp_path, monkeypatch):
    import file_operations

    def broken_replace(src, dst):
        raise OSError('disk full')

    monkeypatch.setattr(file_operations.os, 'replace', broken_replace)
    with pytest.raises(OSError):
        atomic_write_bytes(tmp_path / 'stats.csv', b'data')
    assert list(tmp_path.iterdir()) == []
