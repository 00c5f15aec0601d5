"""Experiment runner: trials, sweeps, methods and baselines."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import (ChannelSet, NetworkScenario, Utility, interference_power,
                    rate_per_user)
from ..energy import EnergyWeights, energy_region, max_weighted_energy
from ..errors import InfeasibleError
from ..mumimo import Algorithm1Options, algorithm1
from ..sumimo import SumimoMode, algorithm2
from .channels import generate_channels
from .config import ConfigError, ExperimentConfig

__all__ = ['Row', 'TrialResult', 'ExperimentResult', 'run_experiment',
           'default_methods', 'E_SWEEP_FRACTION']

#: Automatic E_th sweeps stop at this fraction of the swept user's maximum.
E_SWEEP_FRACTION = 0.9


@dataclass
class Row:
    """One output line; None fields are written blank."""
    trial: int
    sweep_name: str
    sweep_value: object
    method: str
    user_index: int | None
    rate_bits: float | None
    utility: float | None
    harvested_uW: tuple = ()
    interference_uW: tuple = ()
    outer_iters: int | None = None
    inner_iters: int | None = None
    wall_ms: float | None = None
    status: str = ''


@dataclass
class TrialResult:
    """Outcome of one method on one (trial, sweep point).

    Rates are in bits, powers in watts. ``rates_bits`` has one entry per
    S-ID user (a single entry for the cooperative outer bound).
    """
    trial: int
    sweep_name: str
    sweep_value: object
    method: str
    status: str
    rates_bits: np.ndarray = field(default_factory=lambda: np.zeros(0))
    utilities: np.ndarray = field(default_factory=lambda: np.zeros(0))
    harvested_W: np.ndarray = field(default_factory=lambda: np.zeros(0))
    interference_W: np.ndarray = field(default_factory=lambda: np.zeros(0))
    outer_iters: int = 0
    inner_iters: int = 0
    wall_s: float = 0.0
    objective_trace: tuple = ()
    F: np.ndarray | None = None

    @property
    def failed(self) -> bool:
        return self.status.startswith('failed')

    @property
    def total_utility(self) -> float | None:
        if self.status != 'converged' and self.status != 'max-iter':
            return None
        return float(np.sum(self.utilities))

    def rows(self, per_iteration: bool = False) -> list:
        ok = self.status in ('converged', 'max-iter')
        base = dict(trial=self.trial, sweep_name=self.sweep_name,
                    sweep_value=self.sweep_value, method=self.method)
        out = []
        if per_iteration:
            for it, val in enumerate(self.objective_trace):
                out.append(Row(**base, user_index=None, rate_bits=None,
                               utility=float(val), outer_iters=it + 1,
                               status='iterate'))
        out.append(Row(
            **base, user_index=None,
            rate_bits=float(np.sum(self.rates_bits)) if ok and self.rates_bits.size else None,
            utility=self.total_utility,
            harvested_uW=tuple(1e6 * self.harvested_W) if ok else (),
            interference_uW=tuple(1e6 * self.interference_W) if ok else (),
            outer_iters=self.outer_iters, inner_iters=self.inner_iters,
            wall_ms=1e3 * self.wall_s, status=self.status))
        if ok and self.rates_bits.size > 1:
            for k, (r, u) in enumerate(zip(self.rates_bits, self.utilities)):
                out.append(Row(**base, user_index=k, rate_bits=float(r),
                               utility=float(u), status=self.status))
        return out


@dataclass
class ExperimentResult:
    """All rows of a run plus the resolved configuration."""
    config: dict
    rows: list
    trials: list = field(default_factory=list)

    @property
    def any_failed(self) -> bool:
        return any(t.failed for t in self.trials)


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------
def default_methods(cfg: ExperimentConfig) -> list:
    if cfg.methods:
        return list(cfg.methods)
    own = f'Alg1-{cfg.utility}'
    if cfg.mode == 'tradeoff':
        return [own, 'SuMIMO-outerbound']
    if cfg.mode == 'convergence':
        return [own] + (['Alg2-MaxRate'] if cfg.K_I == 1 else [])
    if cfg.mode == 'compare':
        extra = ['Alg2-MaxRate', 'Alg2-QoS'] if cfg.K_I == 1 else []
        return ['Alg1-WSR', 'Alg1-PF', 'Alg1-HMR', 'Alg1-ZF'] + extra + \
            ['SuMIMO-outerbound', 'RoundRobin-TDMA']
    return [own]


def user_utilities(rates_bits, kind: str, alpha) -> np.ndarray:
    """Per-user utility of unfloored rates (zero rates give ``-inf``)."""
    r = np.asarray(rates_bits, dtype=float)
    if kind == 'WSR':
        return np.asarray(alpha, dtype=float) * r
    with np.errstate(divide='ignore'):
        return np.log(r) if kind == 'PF' else -1.0 / r


def _alg1(cfg, ch, sc, kind, seed, init):
    opt = Algorithm1Options(tol=cfg.tol, max_outer=cfg.max_outer)
    prec, rep = algorithm1(ch, sc, Utility(kind), N_G=cfg.N_G, seeds=seed,
                           tols=opt, init=init)
    return prec.F, rep.outer_iterations, rep.inner_iterations, rep.status, \
        rep.objective_trace


def _alg2(cfg, ch, sc, mode):
    prec, rep = algorithm2(ch, sc, SumimoMode(mode))
    return prec.F, rep.outer_iterations, rep.inner_iterations, rep.status, \
        rep.objective_trace


def _harvest(F, ch, sc):
    return np.array([sc.rho * np.sum(np.abs(G @ F) ** 2) for G in ch.G])


def _evaluate(res: TrialResult, F, ch, sc, kind, macro=False):
    res.F = F
    if macro:
        msc = sc.replace(K_I=1, N_I=sc.K_I * sc.N_I, alpha=(1.0,))
        res.rates_bits = rate_per_user(F, ChannelSet(H=[ch.H_stack], G=ch.G, T=ch.T), msc)
        res.utilities = res.rates_bits.copy()
    else:
        res.rates_bits = rate_per_user(F, ch, sc)
        res.utilities = user_utilities(res.rates_bits, kind, sc.alpha)
    res.harvested_W = _harvest(F, ch, sc)
    res.interference_W = interference_power(F, ch)


def _round_robin(cfg, ch, sc, res):
    """Algorithm 2 for each user on its own slot; averages over the slots."""
    K = sc.K_I
    rates, harvest, interf = np.zeros(K), np.zeros(sc.K_E), np.zeros(sc.K_P)
    inner = 0
    for k in range(K):
        ch_k = ChannelSet(H=[ch.H[k]], G=ch.G, T=ch.T)
        sc_k = sc.replace(K_I=1, alpha=(1.0,))
        prec, rep = algorithm2(ch_k, sc_k, SumimoMode.MaxRate)
        rates[k] = rep.extras['rate_bits'] / K
        harvest += _harvest(prec.F, ch, sc) / K
        interf += interference_power(prec.F, ch) / K
        inner += rep.inner_iterations
    res.rates_bits = rates
    res.utilities = user_utilities(rates, cfg.utility, sc.alpha)
    res.harvested_W, res.interference_W = harvest, interf
    res.outer_iters, res.inner_iters, res.status = K, inner, 'converged'


def _run_method(cfg, method, ch, sc, seed, trial, sweep, init=None) -> TrialResult:
    res = TrialResult(trial, sweep[0], sweep[1], method, status='converged')
    t0 = time.perf_counter()
    try:
        if method.startswith('Alg1-') and method != 'Alg1-ZF':
            kind = method.split('-', 1)[1]
            F, res.outer_iters, res.inner_iters, res.status, res.objective_trace = \
                _alg1(cfg, ch, sc, kind, seed, init)
            _evaluate(res, F, ch, sc, kind)
        elif method == 'Alg1-ZF':
            sc_zf = sc.replace(I_th=np.zeros(sc.K_P))
            F, res.outer_iters, res.inner_iters, res.status, res.objective_trace = \
                _alg1(cfg, ch, sc_zf, cfg.utility, seed, init)
            _evaluate(res, F, ch, sc, cfg.utility)
        elif method.startswith('Alg2-'):
            F, res.outer_iters, res.inner_iters, res.status, res.objective_trace = \
                _alg2(cfg, ch, sc, method.split('-', 1)[1])
            _evaluate(res, F, ch, sc, 'WSR')
        elif method == 'SuMIMO-outerbound':
            F, res.outer_iters, res.inner_iters, res.status, res.objective_trace = \
                _alg2(cfg, ch, sc, 'MaxRate')
            _evaluate(res, F, ch, sc, 'WSR', macro=True)
        elif method == 'RoundRobin-TDMA':
            _round_robin(cfg, ch, sc, res)
        else:
            raise ValueError(f"unknown method {method!r}")
    except InfeasibleError:
        res.status = 'infeasible'
    except Exception as exc:  # recorded, never aborts the sweep
        res.status = f'failed: {type(exc).__name__}: {exc}'.replace('\n', ' ')
    res.wall_s = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# sweeps and feasibility
# ---------------------------------------------------------------------------
def _sweep_points(cfg: ExperimentConfig, ch_base, sc_base) -> list:
    """``(name, value, overrides)`` triples; overrides use engineering units."""
    name = cfg.sweep_name
    if name is None:
        return [('', None, {})]
    values = [float(v) for v in cfg.sweep_values]
    if name == 'E_th':
        if not values:
            w = np.zeros(cfg.K_E)
            w[cfg.sweep_user] = 1.0
            top = max_weighted_energy(ch_base, sc_base, EnergyWeights(tuple(w)))
            e_max = 1e6 * top.energies[cfg.sweep_user]
            values = [float(v) for v in
                      np.linspace(0.0, E_SWEEP_FRACTION * e_max, cfg.sweep_points)]
        out = []
        for v in values:
            E = cfg.E_list()
            E[cfg.sweep_user] = v
            out.append((name, v, {'E_th_uW': E}))
        return out
    if name == 'I_th':
        return [(name, v, {'I_th_uW': [v] * cfg.K_P}) for v in values]
    if name == 'P_T':
        return [(name, v, {'P_T_dBm': v}) for v in values]
    return [(name, v, {'K_I': int(v)}) for v in values]


class _Feasibility:
    """Grid feasibility test; regions are cached per (P_T, I_th)."""

    def __init__(self, ch, grid):
        self.ch, self.grid, self.cache = ch, grid, {}

    def __call__(self, sc: NetworkScenario) -> bool:
        if sc.K_E == 0 or not np.any(sc.E_th > 0):
            return True
        key = (sc.P_T, tuple(sc.I_th))
        if key not in self.cache:
            self.cache[key] = np.array(
                [pt.energies for pt in energy_region(self.ch, sc, self.grid)])
        E = self.cache[key]
        return bool(np.max(np.min(E - sc.E_th, axis=1)) >= 0)


def _channels_for(sc: NetworkScenario, seed: int) -> ChannelSet:
    return generate_channels(sc, seed)


# ---------------------------------------------------------------------------
# per-trial drivers
# ---------------------------------------------------------------------------
def _energy_region_trial(cfg, trial, seed):
    sc0 = cfg.scenario()
    ch = _channels_for(sc0, seed)
    results = []
    for name, value, ov in _sweep_points(cfg, ch, sc0):
        sc = cfg.scenario(**ov)
        for w in _grid(cfg):
            sweep = ('weights', ';'.join(repr(x) for x in w.w))
            if name:
                sweep = (f'{name};weights', f'{value!r};{sweep[1]}')
            res = TrialResult(trial, sweep[0], sweep[1], 'energy-region', 'converged')
            t0 = time.perf_counter()
            try:
                pt = max_weighted_energy(ch, sc, w)
                res.harvested_W = pt.energies
                res.interference_W = interference_power(pt.f[:, None], ch)
                res.utilities = np.array([np.dot(w.w, pt.energies) * 1e6])
                res.inner_iters = pt.iterations
                res.status = pt.status
            except InfeasibleError:
                res.status = 'infeasible'
            except Exception as exc:
                res.status = f'failed: {type(exc).__name__}: {exc}'.replace('\n', ' ')
            res.wall_s = time.perf_counter() - t0
            results.append(res)
    return results


def _grid(cfg):
    from ..energy import simplex_grid
    return simplex_grid(cfg.K_E, cfg.energy_grid)


def _solver_trial(cfg, trial, seed):
    methods = default_methods(cfg)
    sc0 = cfg.scenario()
    ch0 = _channels_for(sc0, seed)
    points = _sweep_points(cfg, ch0, sc0)
    feas = _Feasibility(ch0, cfg.feasibility_grid)
    # E_th sweeps run from the highest threshold down so each solution can
    # warm-start the next (it stays feasible as the targets decrease)
    order = list(range(len(points)))
    if cfg.sweep_name == 'E_th':
        order.sort(key=lambda i: -points[i][1])
    prev = {}
    by_point = {}
    for i in order:
        name, value, ov = points[i]
        sc = cfg.scenario(**ov)
        ch = ch0 if sc.K_I == sc0.K_I else _channels_for(sc, seed)
        sweep = (name, value)
        if not feas(sc):
            by_point[i] = [TrialResult(trial, name, value, m, 'infeasible')
                           for m in methods]
            continue
        done = {}
        # ZF first: its solution seeds the interference-tolerant WSR design
        for m in sorted(methods, key=lambda m: m != 'Alg1-ZF'):
            init = []
            if m == 'Alg1-WSR' and 'Alg1-ZF' in done \
                    and done['Alg1-ZF'].F is not None:
                init.append(done['Alg1-ZF'].F)
            if m in prev and prev[m] is not None and m.startswith('Alg1-'):
                init.append(prev[m])
            done[m] = _run_method(cfg, m, ch, sc, seed, trial, sweep, init or None)
            if cfg.sweep_name == 'E_th':
                prev[m] = done[m].F
        by_point[i] = [done[m] for m in methods]
    return [r for i in range(len(points)) for r in by_point[i]]


def _run_trial(cfg, trial):
    seed = cfg.seed + trial
    if cfg.mode == 'energy-region':
        return _energy_region_trial(cfg, trial, seed)
    return _solver_trial(cfg, trial, seed)


def _check(cfg: ExperimentConfig) -> None:
    methods = default_methods(cfg)
    uses_alg2 = any(m.startswith('Alg2-') for m in methods)
    if uses_alg2:
        users = [cfg.K_I]
        if cfg.sweep_name == 'K_I':
            users += [int(v) for v in cfg.sweep_values]
        if any(k != 1 for k in users):
            raise ConfigError("Alg2 methods need K_I = 1 (use SuMIMO-outerbound otherwise)")
    if cfg.mode == 'energy-region':
        if cfg.K_E < 1:
            raise ConfigError("energy-region needs K_E >= 1")
        if cfg.sweep_name in ('E_th', 'K_I'):
            raise ConfigError("energy-region sweeps only P_T or I_th")
    if cfg.sweep_name is not None and cfg.sweep_name != 'E_th' and not cfg.sweep_values:
        raise ConfigError(f"sweep {cfg.sweep_name} needs sweep_values")
    if cfg.sweep_name == 'K_I' and any(float(v) != int(v) or v < 1
                                       for v in cfg.sweep_values):
        raise ConfigError("K_I sweep values must be positive integers")
    if cfg.sweep_name == 'E_th' and cfg.K_E < 1:
        raise ConfigError("E_th sweep needs K_E >= 1")
    if cfg.sweep_name == 'K_I' and cfg.alpha is not None:
        raise ConfigError("alpha cannot be combined with a K_I sweep")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every trial of ``cfg`` and collect the rows.

    Trial ``t`` uses seed ``cfg.seed + t`` for its channels and its random
    starts. Trials may run on several threads; rows are ordered by trial,
    sweep point and method regardless.
    """
    _check(cfg)
    trials = range(cfg.n_trials)
    if cfg.threads > 1 and cfg.n_trials > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            per_trial = list(pool.map(lambda t: _run_trial(cfg, t), trials))
    else:
        per_trial = [_run_trial(cfg, t) for t in trials]
    results = [r for chunk in per_trial for r in chunk]
    per_iter = cfg.mode == 'convergence'
    rows = [row for r in results for row in r.rows(per_iteration=per_iter)]
    return ExperimentResult(config=cfg.to_dict(), rows=rows, trials=results)
