"""End-to-end tests of the command-line front end."""

import csv
import json
import os

import pytest

from cli import EXIT_CONFIG_ERROR, EXIT_OK, available_cpus, build_parser, main


def write_config(path, **fields):
    data = {
        'command': 'simulate',
        'seed': 42,
        'excitation': {'uniform_modes': 3},
        'paddles': 2,
        'realizations': 3,
        'baseline_samples': 10,
        'grid_points': 90,
    }
    data.update(fields)
    data = {key: value for key, value in data.items() if value is not None}
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


def run(tmp_path, name='out', workers=1, **fields):
    config = write_config(tmp_path / f'{name}.json', **fields)
    output = tmp_path / name
    status = main(['--config', config, '--workers', str(workers),
                   '--output', str(output), '--quiet'])
    return status, output


def read_csv(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))


def test_simulate_writes_stats_and_manifest(tmp_path):
    status, output = run(tmp_path)
    assert status == EXIT_OK
    rows = read_csv(output / 'stats.csv')
    assert list(rows[0]) == ['n_modes', 'k_paddles', 'mean_enh', 'std_enh', 'stderr',
                             'realizations', 'ablated']
    assert rows[0]['n_modes'] == '3'
    assert rows[0]['k_paddles'] == '2'
    assert rows[0]['realizations'] == '3'
    assert rows[0]['ablated'] == 'false'

    manifest = json.loads((output / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['command'] == 'simulate'
    assert manifest['files'] == ['stats.csv']
    assert len(manifest['config_hash']) == 64
    assert sorted(p.name for p in output.iterdir()) == ['manifest.json', 'stats.csv']


def test_outputs_are_byte_identical(tmp_path):
    _, first = run(tmp_path, 'a', format='both', raw_dump=True)
    _, second = run(tmp_path, 'b', workers=2, format='both', raw_dump=True)
    for name in ('stats.csv', 'stats.json', 'raw.jsonl'):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_csv_round_trips_json_values(tmp_path):
    _, output = run(tmp_path, format='both')
    row = read_csv(output / 'stats.csv')[0]
    cell = json.loads((output / 'stats.json').read_text(encoding='utf-8'))['cells'][0]
    assert float(row['mean_enh']) == cell['mean_enh']
    assert float(row['std_enh']) == cell['std_enh']


def test_raw_dump_lines(tmp_path):
    _, output = run(tmp_path, raw_dump=True)
    lines = (output / 'raw.jsonl').read_text(encoding='utf-8').splitlines()
    records = [json.loads(line) for line in lines]
    assert [r['seed_path'] for r in records] == [[42, i] for i in range(3)]
    for record in records:
        assert set(record) >= {'seed_path', 'angles', 'objective', 'baseline', 'enhancement'}


def test_ablate_raw_dump_rows_are_distinguishable(tmp_path):
    status, output = run(tmp_path, command='ablate', paddles=[2], realizations=2,
                         seed=1, raw_dump=True)
    assert status == EXIT_OK
    lines = (output / 'raw.jsonl').read_text(encoding='utf-8').splitlines()
    keys = [(tuple(r['seed_path']), r['n_modes'], r['k_paddles'], r['ablated'])
            for r in map(json.loads, lines)]
    assert len(keys) == 4
    assert sorted(keys) == sorted(((1, i), 3, 2, ablated)
                                  for i in range(2) for ablated in (False, True))


def test_sweep_writes_slopes_and_comparator(tmp_path):
    status, output = run(tmp_path, command='sweep', paddles=[1, 2, 3],
                         excitation={'uniform_modes': [1, 3]}, realizations=2,
                         slope_range=[1, 3])
    assert status == EXIT_OK
    assert len(read_csv(output / 'stats.csv')) == 6
    slopes = read_csv(output / 'slopes.csv')
    assert [row['n_modes'] for row in slopes] == ['1', '3']
    lcslm = read_csv(output / 'lcslm.csv')
    assert lcslm[0] == {'count': '0', 'enhancement': '1.0'}
    assert len(lcslm) == 7


def test_ablate_writes_paired_columns(tmp_path):
    status, output = run(tmp_path, command='ablate', paddles=[1, 2], realizations=2)
    assert status == EXIT_OK
    rows = read_csv(output / 'ablation.csv')
    assert list(rows[0]) == ['k_paddles', 'mean_full', 'std_full', 'mean_ablated',
                             'std_ablated', 'ratio']
    assert [row['k_paddles'] for row in rows] == ['1', '2']
    stats = read_csv(output / 'stats.csv')
    assert sorted(row['ablated'] for row in stats) == ['false', 'false', 'true', 'true']


def test_modes_lists_guided_groups(tmp_path):
    status, output = run(tmp_path, command='modes', excitation=None,
                         offset_scan_um=[0.0, 10.0, 20.0])
    assert status == EXIT_OK
    rows = read_csv(output / 'modes.csv')
    assert list(rows[0]) == ['group', 'modes', 'beta_rad_per_m', 'weight']
    assert len(rows) == 17
    assert sum(int(row['modes']) for row in rows[2:8]) == 33
    scan = read_csv(output / 'offset_scan.csv')
    assert [float(row['offset_um']) for row in scan] == [0.0, 10.0, 20.0]


def test_groups_excitation_on_reference_fiber(tmp_path):
    status, output = run(tmp_path, excitation={'groups': [0.0, 0.0, 0.5, 0.5]},
                         paddles=1, realizations=1, baseline_samples=5)
    assert status == EXIT_OK
    assert read_csv(output / 'stats.csv')[0]['n_modes'] == '7'


def test_dump_model_and_plot(tmp_path):
    status, output = run(tmp_path, dump_model=True, plot=True)
    assert status == EXIT_OK
    manifest = json.loads((output / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['files'] == ['enhancement.png', 'realization_0.npz', 'stats.csv']
    assert (output / 'enhancement.png').read_bytes()[:8] == b'\x89PNG\r\n\x1a\n'


@pytest.mark.parametrize('fields', [
    {'seed': None},
    {'excitation': {'uniform_modes': 7}},
    {'excitation': {'groups': [0.5], 'uniform_modes': 6}},
    {'excitation': {'groups_file': 'missing.csv'}},
])
def test_config_errors_exit_with_two(tmp_path, capsys, fields):
    path = write_config(tmp_path / 'run.json', paddles=1, **fields)
    status = main(['--config', path, '--output', str(tmp_path / 'out'), '--quiet'])
    assert status == EXIT_CONFIG_ERROR
    assert 'config error' in capsys.readouterr().err
    assert not (tmp_path / 'out' / 'stats.csv').exists()


def test_missing_config_file(tmp_path):
    assert main(['--config', str(tmp_path / 'nope.json'), '--quiet']) == EXIT_CONFIG_ERROR


def test_workers_must_be_positive(tmp_path):
    config = write_config(tmp_path / 'run.json')
    assert main(['--config', config, '--workers', '0', '--quiet']) == EXIT_CONFIG_ERROR


def test_default_workers_follow_affinity_mask(monkeypatch):
    monkeypatch.setattr(os, 'sched_getaffinity', lambda pid: {0, 3}, raising=False)
    assert build_parser().parse_args(['--config', 'run.json']).workers == 2


def test_default_workers_without_affinity(monkeypatch):
    monkeypatch.delattr(os, 'sched_getaffinity', raising=False)
    monkeypatch.setattr(os, 'cpu_count', lambda: None)
    assert available_cpus() == 1
