"""
Tests for the command-line front end
"""

import json
import math

import pytest

from main import USAGE_EXIT, main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_ex1_document(capsys):
    code, out = run(capsys, 'ex1', '--samples', '50')
    assert code == 0
    payload = json.loads(out)
    assert payload['lambda'] == pytest.approx(-0.75)
    assert payload['V0'] == pytest.approx(0.75)
    assert payload['V1'] == pytest.approx(3.0)
    assert payload['residual'] < 1e-12
    assert payload['decay']['alpha'] == pytest.approx(math.log(2.0), rel=1e-8)


def test_green_on_the_chain(capsys, data_dir):
    code, out = run(capsys, 'green', '--stencil', str(data_dir / 'chain.json'), '--lambda', '-3', '--box', '20')
    assert code == 0
    payload = json.loads(out)
    assert payload['u0'] == pytest.approx(1.0 / math.sqrt(5.0), abs=1e-10)
    assert payload['V0'] == pytest.approx(-math.sqrt(5.0), abs=1e-9)


def test_band_energy_is_a_domain_error(capsys, data_dir):
    code, out = run(capsys, 'green', '--stencil', str(data_dir / 'chain.json'), '--lambda', '0.5')
    assert code == 2
    assert out == ''


def test_missing_stencil_file_is_a_domain_error(capsys, tmp_path):
    code, _ = run(capsys, 'bands', '--stencil', str(tmp_path / 'absent.json'))
    assert code == 2


def test_usage_errors(capsys):
    assert main([]) == USAGE_EXIT
    assert main(['ex2', '--a', '0.5']) == USAGE_EXIT
    assert main(['nonsense']) == USAGE_EXIT
    capsys.readouterr()


def test_bands_csv(capsys, data_dir):
    code, out = run(capsys, 'bands', '--stencil', str(data_dir / 'ex1.json'), '--samples', '20', '--format', 'csv')
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) > 1
    assert 'k' in lines[0].split(',')


def test_ex2_reports_multiplicities(capsys):
    code, out = run(capsys, 'ex2', '--a', '0.5', '--b', '0.6', '--c', '0.8', '--samples', '30')
    assert code == 0
    payload = json.loads(out)
    assert payload['c'] == 0.8
    assert payload['bands']


def test_ex2_saves_its_stencil(capsys, tmp_path):
    target = tmp_path / 'ex2.json'
    code, out = run(capsys, 'ex2', '--a', '0.5', '--b', '0.6', '--c', '0.8', '--samples', '10',
                    '--save-stencil', str(target))
    assert code == 0
    assert json.loads(out)['stencil_file'] == str(target)
    code, out = run(capsys, 'bands', '--stencil', str(target), '--samples', '10')
    assert code == 0
    assert json.loads(out)['bands']


def test_ex3_bound_state(capsys):
    code, out = run(capsys, 'ex3', '--box', '10')
    assert code == 0
    payload = json.loads(out)
    assert payload['embedded']
    assert payload['residual_vertex'] < 1e-10
    assert payload['defect']['ode_residual'] < 1e-10


def test_coupled_two_graph_embedding(capsys, data_dir):
    code, out = run(capsys, 'coupled', '--stencil', str(data_dir / 'chain.json'), '--box', '20', '--quad-n', '128')
    assert code == 0
    payload = json.loads(out)
    assert payload['lambda'] == pytest.approx(-3.0)
    assert payload['eigenvalue'] == pytest.approx(-1.5)


def test_coupled_three_graph_embedding(capsys, data_dir):
    code, out = run(capsys, 'coupled', '--stencil', str(data_dir / 'chain.json'), '--K', str(data_dir / 'K3.json'),
                    '--box', '20', '--quad-n', '128')
    assert code == 0
    assert json.loads(out)['fiber'] == 3


def test_coupled_from_a_descriptor(capsys, data_dir):
    code, out = run(capsys, 'coupled', '--coupling', str(data_dir / 'coupling_chain.json'), '--box', '20',
                    '--quad-n', '128')
    assert code == 0
    payload = json.loads(out)
    assert payload['stencil'] == 'chain'
    assert payload['lambda'] == pytest.approx(-3.0)
    assert payload['eigenvalue'] == pytest.approx(-1.5)


def test_coupled_needs_exactly_one_source(capsys, data_dir):
    assert main(['coupled']) == USAGE_EXIT
    assert main(['coupled', '--stencil', str(data_dir / 'chain.json'),
                 '--coupling', str(data_dir / 'coupling_chain.json')]) == USAGE_EXIT
    assert main(['coupled', '--coupling', str(data_dir / 'coupling_chain.json'),
                 '--K', str(data_dir / 'K3.json')]) == 2
    capsys.readouterr()


def test_grid2d_neumann_lift(capsys):
    code, out = run(capsys, 'grid2d', '--mu', str(0.5 + math.pi), '--bc', 'neumann', '--box', '12',
                    '--quad-n', '128')
    assert code == 0
    payload = json.loads(out)
    assert payload['embedded']
    assert payload['lift']['sign'] == 1


def test_verify_quick_suite(capsys, data_dir, tmp_path):
    target = tmp_path / 'report.json'
    code, out = run(capsys, 'verify', '--config', str(data_dir / 'suite_quick.json'), '--workers', '1',
                    '--output', str(target))
    assert code == 0
    assert out == ''
    report = json.loads(target.read_text(encoding='utf-8'))
    assert report['unexpected'] == []
