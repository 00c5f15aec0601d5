import csv
import io
import json

import numpy as np
import pytest

from crswipt.core import NetworkScenario, interference_power
from crswipt.harness import cli, experiments
from crswipt.harness.channels import PATHLOSS_AMPLITUDE, generate_channels
from crswipt.harness.config import (ConfigError, ExperimentConfig, dbm_to_watt,
                                    load_config, uw_to_watt)
from crswipt.harness.experiments import Row, run_experiment
from crswipt.harness.output import COLUMNS, emit, strip_timing, to_csv, to_json


def small_config(**kw):
    base = dict(mode='compare', M=3, K_I=2, N_I=1, K_E=1, N_E=2, K_P=1, N_P=1,
                E_th_uW=1.0, I_th_uW=0.1, N_G=2, feasibility_grid=3, energy_grid=5,
                max_outer=60)
    base.update(kw)
    return ExperimentConfig(**base)


def write_config(tmp_path, **kw):
    p = tmp_path / 'cfg.json'
    p.write_text(json.dumps(small_config(**kw).to_dict()))
    return p


class TestUnits:
    def test_dbm(self):
        assert dbm_to_watt(10) == pytest.approx(0.01, rel=1e-15)
        assert dbm_to_watt(-30) == pytest.approx(1e-6, rel=1e-15)

    def test_uw(self):
        assert uw_to_watt(30) == pytest.approx(3e-5)
        assert uw_to_watt(None) == np.inf

    def test_scenario_conversion(self):
        sc = ExperimentConfig(E_th_uW=[30, 20], I_th_uW=[0.1, None]).scenario()
        assert sc.P_T == pytest.approx(0.01)
        assert sc.sigma_n2 == pytest.approx(1e-6)
        np.testing.assert_allclose(sc.E_th, [3e-5, 2e-5])
        assert sc.I_th[0] == pytest.approx(1e-7) and sc.I_th[1] == np.inf


class TestChannels:
    def test_deterministic(self):
        sc = NetworkScenario(M=4, K_I=2, N_I=2, P_T=1.0, sigma_n2=1.0, K_E=2, N_E=2,
                             E_th=[0, 0], K_P=2, N_P=1, I_th=[1, 1])
        a, b = generate_channels(sc, 11), generate_channels(sc, 11)
        for x, y in zip(a.H + a.G + a.T, b.H + b.G + b.T):
            assert x.tobytes() == y.tobytes()
        c = generate_channels(sc, 12)
        assert not np.array_equal(a.H[0], c.H[0])

    def test_user_substreams_are_stable(self):
        sc = NetworkScenario(M=4, K_I=2, N_I=2, P_T=1.0, sigma_n2=1.0)
        a = generate_channels(sc, 3)
        b = generate_channels(sc.replace(K_I=3, alpha=None), 3)
        assert np.array_equal(a.H[1], b.H[1])

    def test_scale(self):
        assert PATHLOSS_AMPLITUDE == pytest.approx(0.03162, abs=1e-5)

    def test_entry_power(self):
        sc = NetworkScenario(M=100, K_I=1, N_I=1000, P_T=1.0, sigma_n2=1.0)
        H = generate_channels(sc, 0).H[0]
        assert np.mean(np.abs(H) ** 2) == pytest.approx(1e-3, rel=0.02)
        # circular: real and imaginary parts carry half the power each
        assert np.mean(H.real ** 2) == pytest.approx(5e-4, rel=0.02)


class TestConfig:
    def test_unknown_key(self, tmp_path):
        p = tmp_path / 'c.json'
        p.write_text(json.dumps({'mode': 'solve', 'P_T_dbm': 10}))
        with pytest.raises(ConfigError, match='P_T_dbm'):
            load_config(p)

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(mode='plot')
        with pytest.raises(ConfigError):
            ExperimentConfig(E_th_uW=[1.0])
        with pytest.raises(ConfigError):
            ExperimentConfig(methods=['Alg3'])

    def test_round_trip(self, tmp_path):
        cfg = small_config(sweep_name='P_T', sweep_values=[5.0, 10.0])
        p = tmp_path / 'c.json'
        p.write_text(json.dumps(cfg.to_dict()))
        assert load_config(p) == cfg
        assert load_config(p, seed=9).seed == 9

    def test_alg2_needs_single_user(self):
        with pytest.raises(ConfigError):
            run_experiment(small_config(methods=['Alg2-MaxRate']))


class TestOutput:
    def test_empty(self):
        assert to_csv([]) == ','.join(COLUMNS) + '\n'

    def test_numpy_scalars_print_plainly(self):
        row = Row(0, 'E_th', np.float64(0.5), 'm', None, np.float64(1.25), None)
        assert next(csv.reader([to_csv([row]).splitlines()[1]]))[2] == '0.5'
        assert next(csv.reader([to_csv([row]).splitlines()[1]]))[5] == '1.25'

    def test_one_row(self):
        row = Row(trial=0, sweep_name='E_th', sweep_value=1.5, method='Alg1-WSR',
                  user_index=None, rate_bits=2.25, utility=2.25, harvested_uW=(1.0, 2.0),
                  interference_uW=(0.1,), outer_iters=3, inner_iters=40, wall_ms=1.0,
                  status='converged')
        lines = to_csv([row]).splitlines()
        assert len(lines) == 2
        assert lines[0].split(',') == list(COLUMNS)
        assert next(csv.reader([lines[1]])) == [
            '0', 'E_th', '1.5', 'Alg1-WSR', '', '2.25', '2.25', '1.0;2.0', '0.1', '3',
            '40', '1.0', 'converged']

    def test_json_round_trip_is_exact(self):
        res = run_experiment(small_config(mode='solve'))
        doc = json.loads(to_json(res))
        assert doc['columns'] == list(COLUMNS)
        assert doc['config'] == json.loads(json.dumps(res.config))
        for row, d in zip(res.rows, doc['rows']):
            for key in ('rate_bits', 'utility', 'wall_ms'):
                v = getattr(row, key)
                assert (v is None and d[key] is None) or float(d[key]) == v
            assert tuple(float(x) for x in d['harvested_uW']) == row.harvested_uW
            assert tuple(float(x) for x in d['interference_uW']) == row.interference_uW

    def test_write_error_names_path(self, tmp_path):
        res = run_experiment(small_config(mode='energy-region'))
        bad = tmp_path / 'missing' / 'out.csv'
        with pytest.raises(OSError, match='missing'):
            emit(res, str(bad))

    def test_strip_timing(self):
        row = Row(0, '', '', 'm', None, 1.0, 1.0, wall_ms=3.5, status='converged')
        a = to_csv([row])
        row.wall_ms = 9.0
        assert strip_timing(a) == strip_timing(to_csv([row])) and a != to_csv([row])


class TestRuns:
    def test_energy_region_rows(self):
        res = run_experiment(small_config(mode='energy-region', K_E=2, E_th_uW=[1, 1],
                                          energy_grid=21))
        assert len(res.rows) == 21
        for r in res.rows:
            w = [float(x) for x in r.sweep_value.split(';')]
            assert sum(w) == pytest.approx(1.0, abs=1e-12)
            assert r.status == 'converged'

    def test_compare_run(self):
        res = run_experiment(small_config())
        agg = {r.method: r for r in res.rows if r.user_index is None}
        assert set(agg) == {'Alg1-WSR', 'Alg1-PF', 'Alg1-HMR', 'Alg1-ZF',
                            'SuMIMO-outerbound', 'RoundRobin-TDMA'}
        assert all(r.status == 'converged' for r in agg.values())
        assert agg['SuMIMO-outerbound'].rate_bits >= agg['Alg1-WSR'].rate_bits
        assert agg['Alg1-WSR'].rate_bits >= agg['Alg1-ZF'].rate_bits - 1e-9
        assert max(agg['Alg1-ZF'].interference_uW) <= 1e-12
        for r in agg.values():
            assert min(r.harvested_uW) >= 1.0 * (1 - 1e-4)
            assert max(r.interference_uW) <= 0.1 * (1 + 1e-6)

    def test_infeasible_points_are_recorded(self):
        res = run_experiment(small_config(mode='solve', E_th_uW=1e4))
        assert [r.status for r in res.rows] == ['infeasible']
        assert not res.any_failed

    def test_convergence_trace_monotone(self):
        res = run_experiment(small_config(mode='convergence', K_I=1, N_I=2))
        it = [r.utility for r in res.rows if r.status == 'iterate' and r.method == 'Alg1-WSR']
        assert len(it) >= 2
        for a, b in zip(it, it[1:]):
            assert b <= a + 1e-9 * max(1.0, abs(a))
        assert {'Alg1-WSR', 'Alg2-MaxRate'} <= {r.method for r in res.rows}

    def test_sweep_shares_channels(self):
        res = run_experiment(small_config(mode='solve', sweep_name='I_th',
                                          sweep_values=[0.05, 0.5]))
        agg = [r for r in res.rows if r.user_index is None]
        assert [r.sweep_value for r in agg] == [0.05, 0.5]
        assert all(type(r.sweep_value) is float for r in agg)
        # a looser interference budget on the same channels cannot hurt much
        assert agg[1].rate_bits >= agg[0].rate_bits * (1 - 1e-3)

    def test_threads_do_not_change_output(self):
        a = run_experiment(small_config(mode='solve', n_trials=3, threads=1))
        b = run_experiment(small_config(mode='solve', n_trials=3, threads=3))
        assert strip_timing(to_csv(a.rows)) == strip_timing(to_csv(b.rows))


class TestCli:
    def test_ok(self, tmp_path, capsys):
        cfg = write_config(tmp_path, mode='energy-region')
        out = tmp_path / 'o.csv'
        assert cli.main(['energy-region', '--config', str(cfg), '--out', str(out)]) == 0
        assert out.read_text().startswith(','.join(COLUMNS))

    def test_json_to_stdout(self, tmp_path, capsys):
        cfg = write_config(tmp_path, mode='energy-region')
        assert cli.main(['energy-region', '--config', str(cfg), '--format', 'json',
                         '--seed', '5']) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc['config']['seed'] == 5

    def test_config_errors(self, tmp_path, capsys):
        p = tmp_path / 'bad.json'
        p.write_text('{"mode": "solve", "bogus": 1}')
        assert cli.main(['solve', '--config', str(p)]) == 1
        assert cli.main(['solve', '--config', str(tmp_path / 'nope.json')]) == 1
        with pytest.raises(SystemExit) as exc:
            cli.main(['solve', '--format', 'xml'])
        assert exc.value.code == 1

    def test_failed_trial(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise RuntimeError('solver blew up')
        monkeypatch.setattr(experiments, '_alg1', boom)
        cfg = write_config(tmp_path, mode='solve')
        out = tmp_path / 'o.csv'
        assert cli.main(['solve', '--config', str(cfg), '--out', str(out)]) == 2
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert rows[0]['status'].startswith('failed: RuntimeError')

    def test_deterministic_bytes(self, tmp_path):
        cfg = write_config(tmp_path, mode='solve', n_trials=2)
        outs = []
        for name in ('a.csv', 'b.csv'):
            assert cli.main(['solve', '--config', str(cfg), '--out',
                             str(tmp_path / name)]) == 0
            outs.append(strip_timing((tmp_path / name).read_text()).encode())
        assert outs[0] == outs[1]
