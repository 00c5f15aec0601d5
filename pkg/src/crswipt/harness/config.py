"""Experiment configuration in engineering units.

Configs are flat JSON objects whose keys are exactly the field names of
:class:`ExperimentConfig`; unknown keys are rejected so that typos fail
fast. Powers are in dBm and thresholds in microwatts.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from ..core import NetworkScenario, Utility

MODES = ('energy-region', 'solve', 'tradeoff', 'convergence', 'compare')
SWEEPS = ('E_th', 'I_th', 'P_T', 'K_I')
METHODS = ('Alg1-WSR', 'Alg1-PF', 'Alg1-HMR', 'Alg1-ZF', 'Alg2-MaxRate',
           'Alg2-QoS', 'SuMIMO-outerbound', 'RoundRobin-TDMA')


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def dbm_to_watt(dbm: float) -> float:
    """``10^((dBm - 30) / 10)``."""
    return 10.0 ** ((float(dbm) - 30.0) / 10.0)


def uw_to_watt(uw: float | None) -> float:
    """Microwatts to watts; None means unbounded."""
    return math.inf if uw is None else 1e-6 * float(uw)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a run.

    ``E_th_uW`` and ``I_th_uW`` accept a scalar (applied to every user) or
    a list; a None entry in ``I_th_uW`` means no interference limit.
    ``sweep_values`` are in the sweep axis' unit (uW, dBm or a user
    count). An ``E_th`` sweep without values spans ``sweep_points`` levels
    from zero to the swept user's largest reachable energy, per trial.
    """
    mode: str = 'solve'
    seed: int = 0
    n_trials: int = 1
    M: int = 4
    K_I: int = 2
    N_I: int = 2
    K_E: int = 2
    N_E: int = 2
    K_P: int = 2
    N_P: int = 1
    P_T_dBm: float = 10.0
    sigma_n2_dBm: float = -30.0
    rho: float = 0.5
    E_th_uW: object = field(default_factory=lambda: [30.0, 20.0])
    I_th_uW: object = 0.1
    alpha: list | None = None
    utility: str = 'WSR'
    methods: list | None = None
    N_G: int = 100
    sweep_name: str | None = None
    sweep_values: list = field(default_factory=list)
    sweep_user: int = 0
    sweep_points: int = 5
    energy_grid: int = 21
    feasibility_grid: int = 21
    tol: float = 1e-5
    max_outer: int = 200
    threads: int = 1

    def __post_init__(self):
        self.validate()

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ('n_trials', 'M', 'K_I', 'N_I', 'N_E', 'N_P', 'N_G',
                     'sweep_points', 'energy_grid', 'feasibility_grid',
                     'max_outer', 'threads'):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ('K_E', 'K_P', 'seed', 'sweep_user'):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ConfigError(f"{name} must be a nonnegative integer, got {v!r}")
        if self.sweep_name is not None and self.sweep_name not in SWEEPS:
            raise ConfigError(f"sweep_name must be one of {SWEEPS} or null")
        if self.sweep_name == 'E_th' and self.sweep_user >= max(self.K_E, 1):
            raise ConfigError("sweep_user is out of range")
        try:
            Utility(self.utility)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.methods is not None:
            bad = [m for m in self.methods if m not in METHODS]
            if bad:
                raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        self.E_list()
        self.I_list()
        try:
            self.scenario()
        except ValueError as exc:
            raise ConfigError(f"invalid scenario: {exc}") from None

    def _per_user(self, value, K, name, allow_none=False):
        if value is None and allow_none:
            return [None] * K
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [float(value)] * K
        if isinstance(value, list) and len(value) == K:
            out = []
            for v in value:
                if v is None and allow_none:
                    out.append(None)
                elif isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0:
                    out.append(float(v))
                else:
                    raise ConfigError(f"{name} entries must be nonnegative numbers")
            return out
        raise ConfigError(f"{name} must be a number or a list of {K} numbers")

    def E_list(self, K_E: int | None = None) -> list:
        return self._per_user(self.E_th_uW, self.K_E if K_E is None else K_E, 'E_th_uW')

    def I_list(self) -> list:
        return self._per_user(self.I_th_uW, self.K_P, 'I_th_uW', allow_none=True)

    # -- conversion -------------------------------------------------------
    def scenario(self, **overrides) -> NetworkScenario:
        """NetworkScenario in SI units; ``overrides`` use engineering units."""
        K_I = overrides.get('K_I', self.K_I)
        P_dBm = overrides.get('P_T_dBm', self.P_T_dBm)
        E = overrides.get('E_th_uW', self.E_list())
        I = overrides.get('I_th_uW', self.I_list())
        alpha = self.alpha
        if alpha is not None and len(alpha) != K_I:
            if 'K_I' in overrides:
                alpha = None
            else:
                raise ValueError(f"alpha has {len(alpha)} entries for {K_I} users")
        return NetworkScenario(
            M=self.M, K_I=K_I, N_I=self.N_I, K_E=self.K_E, N_E=self.N_E,
            K_P=self.K_P, N_P=self.N_P, P_T=dbm_to_watt(P_dBm),
            sigma_n2=dbm_to_watt(self.sigma_n2_dBm), rho=self.rho,
            E_th=[uw_to_watt(e) for e in E], I_th=[uw_to_watt(i) for i in I],
            alpha=alpha)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a JSON config file; ``overrides`` (non-None) replace its fields."""
    try:
        with open(path, encoding='utf-8') as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)
