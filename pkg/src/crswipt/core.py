"""Domain types and the performance metrics every design is scored with.

Rates are reported in bits. The solvers work in nats internally; the
optimizing precoder is unaffected because every supported utility is a
monotone function of a common rescaling of the rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError

__all__ = ['NetworkScenario', 'ChannelSet', 'Precoder', 'Utility',
           'SolveReport', 'rate_per_user', 'rates_nats', 'harvested_power',
           'interference_power', 'sum_utility', 'constraint_residuals',
           'ScaledProblem', 'RATE_FLOOR_BITS']

#: Floor applied to rates before PF/HMR utilities are evaluated mid-iteration.
RATE_FLOOR_BITS = 1e-12

LN2 = np.log(2.0)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NetworkScenario:
    """The immutable problem statement.

    Powers and thresholds are in watts. ``E_th`` is the post-efficiency
    energy the EH users must collect, i.e. it is compared with
    ``rho * ||G_i F||_F^2``. ``I_th`` entries may be ``0`` (zero-forcing
    toward that primary user) or ``inf`` (no constraint).
    """
    M: int
    K_I: int
    N_I: int
    P_T: float
    sigma_n2: float
    K_E: int = 0
    N_E: int = 1
    K_P: int = 0
    N_P: int = 1
    rho: float = 1.0
    E_th: Sequence[float] = ()
    I_th: Sequence[float] = ()
    alpha: Sequence[float] | None = None

    def __post_init__(self):
        for name in ('M', 'K_I', 'N_I', 'N_E', 'N_P'):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ('K_E', 'K_P'):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.P_T > 0:
            raise ValueError("P_T must be positive")
        if not self.sigma_n2 > 0:
            raise ValueError("sigma_n2 must be positive")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        E_th = _frozen_array(self.E_th)
        I_th = _frozen_array(self.I_th)
        alpha = _frozen_array(np.ones(self.K_I) if self.alpha is None
                              else self.alpha)
        if E_th.size != self.K_E:
            raise DimensionError(f"E_th has {E_th.size} entries, K_E = {self.K_E}")
        if I_th.size != self.K_P:
            raise DimensionError(f"I_th has {I_th.size} entries, K_P = {self.K_P}")
        if alpha.size != self.K_I:
            raise DimensionError(f"alpha has {alpha.size} entries, K_I = {self.K_I}")
        if np.any(E_th < 0) or np.any(I_th < 0) or np.any(alpha < 0):
            raise ValueError("E_th, I_th and alpha must be nonnegative")
        if np.any(np.isnan(E_th)) or np.any(np.isinf(E_th)):
            raise ValueError("E_th must be finite")
        object.__setattr__(self, 'E_th', E_th)
        object.__setattr__(self, 'I_th', I_th)
        object.__setattr__(self, 'alpha', alpha)

    @property
    def E_eff(self) -> np.ndarray:
        """Energy targets on the raw ``||G_i F||^2`` scale (``E_th / rho``)."""
        return self.E_th / self.rho

    def replace(self, **changes) -> NetworkScenario:
        """Copy with some fields changed."""
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return NetworkScenario(**fields)


@dataclass(frozen=True)
class ChannelSet:
    """Channel matrices ``H_k`` (N_I x M), ``G_i`` (N_E x M), ``T_j`` (N_P x M)."""
    H: tuple
    G: tuple = ()
    T: tuple = ()

    def __post_init__(self):
        for name in ('H', 'G', 'T'):
            mats = tuple(np.array(m, dtype=complex) for m in getattr(self, name))
            for m in mats:
                m.flags.writeable = False
            object.__setattr__(self, name, mats)

    def validate(self, sc: NetworkScenario) -> None:
        """Raise if the channel shapes disagree with ``sc`` or hold NaN/inf."""
        for name, mats, K, N in (('H', self.H, sc.K_I, sc.N_I),
                                 ('G', self.G, sc.K_E, sc.N_E),
                                 ('T', self.T, sc.K_P, sc.N_P)):
            if len(mats) != K:
                raise DimensionError(f"{name} has {len(mats)} matrices, expected {K}")
            for idx, m in enumerate(mats):
                if m.shape != (N, sc.M):
                    raise DimensionError(
                        f"{name}[{idx}] has shape {m.shape}, expected {(N, sc.M)}")
                if not np.all(np.isfinite(m)):
                    raise ValueError(f"{name}[{idx}] has non-finite entries")

    @property
    def H_stack(self) -> np.ndarray:
        return np.vstack(self.H)


@dataclass(frozen=True)
class Precoder:
    """Stacked precoder ``F = [F_1, ..., F_KI]`` of shape M x (K_I N_I)."""
    F: np.ndarray
    N_I: int

    def __post_init__(self):
        F = np.array(self.F, dtype=complex)
        if F.ndim != 2 or F.shape[1] % self.N_I:
            raise DimensionError(f"F shape {F.shape} is not M x (K_I * {self.N_I})")
        if not np.all(np.isfinite(F)):
            raise ValueError("precoder has non-finite entries")
        F.flags.writeable = False
        object.__setattr__(self, 'F', F)

    @property
    def K_I(self) -> int:
        return self.F.shape[1] // self.N_I

    def block(self, k: int) -> np.ndarray:
        return self.F[:, k * self.N_I:(k + 1) * self.N_I]

    @property
    def blocks(self) -> list:
        return [self.block(k) for k in range(self.K_I)]

    @property
    def power(self) -> float:
        """Transmit power ``trace(F^H F)``."""
        return float(np.sum(np.abs(self.F) ** 2))


@dataclass(frozen=True)
class Utility:
    """Sum-utility selector.

    ``kind`` is ``'WSR'``, ``'PF'`` or ``'HMR'``. For WSR, ``alpha`` holds
    the per-user weights; when left as None the scenario's ``alpha`` is
    used.
    """
    kind: str = 'WSR'
    alpha: tuple | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ('WSR', 'PF', 'HMR'):
            raise ValueError(f"unknown utility {self.kind!r}")
        object.__setattr__(self, 'kind', kind)
        if self.alpha is not None:
            if kind != 'WSR':
                raise ValueError("only WSR carries weights")
            object.__setattr__(self, 'alpha', tuple(float(a) for a in self.alpha))

    @classmethod
    def wsr(cls, alpha=None) -> Utility:
        return cls('WSR', None if alpha is None else tuple(alpha))

    def weights(self, K_I: int, sc: NetworkScenario | None = None) -> np.ndarray:
        if self.alpha is not None:
            alpha = np.asarray(self.alpha, dtype=float)
        elif sc is not None:
            alpha = np.asarray(sc.alpha, dtype=float)
        else:
            alpha = np.ones(K_I)
        if alpha.size != K_I:
            raise DimensionError(f"{alpha.size} WSR weights for {K_I} users")
        return alpha


@dataclass(frozen=True)
class SolveReport:
    """What a solver did: traces, residuals, iteration counts and status.

    ``constraint_residuals`` maps ``'power'``, ``'eh_<i>'`` and ``'cr_<j>'``
    to signed slacks (watts, post-efficiency for EH). A slack of
    ``>= -tolerance`` means the constraint is met.
    """
    objective_trace: tuple
    constraint_residuals: Mapping[str, float]
    inner_iterations: int
    outer_iterations: int
    status: str
    extras: Mapping = field(default_factory=dict)

    STATUSES = ('converged', 'max-iter', 'infeasible')

    def __post_init__(self):
        if self.status not in self.STATUSES:
            raise ValueError(f"bad status {self.status!r}")
        object.__setattr__(self, 'objective_trace', tuple(self.objective_trace))


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Metrics
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def _as_matrix(F) -> np.ndarray:
    return F.F if isinstance(F, Precoder) else np.asarray(F)


def _check_F(F: np.ndarray, sc: NetworkScenario) -> None:
    if F.shape != (sc.M, sc.K_I * sc.N_I):
        raise DimensionError(
            f"precoder shape {F.shape}, expected {(sc.M, sc.K_I * sc.N_I)}")


def rates_nats(F: np.ndarray, H: Sequence[np.ndarray], sigma_n2: float,
               N_I: int) -> np.ndarray:
    """Per-user rates in nats for a stacked precoder (no validation)."""
    K = len(H)
    out = np.empty(K)
    for k, Hk in enumerate(H):
        HF = Hk @ F
        S = HF[:, k * N_I:(k + 1) * N_I]
        R = HF @ HF.conj().T - S @ S.conj().T + sigma_n2 * np.eye(Hk.shape[0])
        X = S.conj().T @ np.linalg.solve(R, S)
        sign, logdet = np.linalg.slogdet(np.eye(N_I) + 0.5 * (X + X.conj().T))
        out[k] = max(logdet, 0.0)
    return out


def rate_per_user(F, ch: ChannelSet, sc: NetworkScenario) -> np.ndarray:
    """Achievable rate of every S-ID user in bits.

    ``R_k = log2 det(I + F_k^H H_k^H R_nk^{-1} H_k F_k)`` where ``R_nk``
    collects the other users' streams plus noise.
    """
    F = _as_matrix(F)
    _check_F(F, sc)
    ch.validate(sc)
    return rates_nats(F, ch.H, sc.sigma_n2, sc.N_I) / LN2


def harvested_power(F, ch: ChannelSet, sc: NetworkScenario) -> np.ndarray:
    """Harvested power ``rho * ||G_i F||_F^2`` of every EH user (watts)."""
    F = _as_matrix(F)
    _check_F(F, sc)
    ch.validate(sc)
    return np.array([sc.rho * np.sum(np.abs(G @ F) ** 2) for G in ch.G])


def interference_power(F, ch: ChannelSet) -> np.ndarray:
    """Interference ``||T_j F||_F^2`` at every primary receiver (watts)."""
    F = _as_matrix(F)
    out = []
    for j, T in enumerate(ch.T):
        if T.shape[1] != F.shape[0]:
            raise DimensionError(f"T[{j}] has {T.shape[1]} columns, F has {F.shape[0]} rows")
        out.append(np.sum(np.abs(T @ F) ** 2))
    return np.array(out)


def sum_utility(rates, u: Utility, alpha=None) -> float:
    """Sum utility of a rate vector.

    WSR gives ``sum alpha_k R_k``, PF ``sum log R_k`` and HMR
    ``sum -1/R_k``. PF and HMR need strictly positive rates; callers that
    iterate from cold starts floor the rates first (``RATE_FLOOR_BITS``).
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ValueError("rates must be nonnegative")
    if u.kind == 'WSR':
        w = u.weights(rates.size) if alpha is None else np.asarray(alpha, float)
        return float(np.dot(w, rates))
    if np.any(rates <= 0):
        raise ValueError(f"{u.kind} utility is undefined for a zero rate")
    if u.kind == 'PF':
        return float(np.sum(np.log(rates)))
    return float(np.sum(-1.0 / rates))


def constraint_residuals(F, ch: ChannelSet, sc: NetworkScenario) -> dict:
    """Signed slacks of every constraint; negative means violated."""
    F = _as_matrix(F)
    res = {'power': float(sc.P_T - np.sum(np.abs(F) ** 2))}
    if sc.K_E:
        for i, e in enumerate(harvested_power(F, ch, sc)):
            res[f'eh_{i}'] = float(e - sc.E_th[i])
    for j, v in enumerate(interference_power(F, ch)):
        res[f'cr_{j}'] = float(sc.I_th[j] - v)
    return res


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Normalized problem used inside the dual solvers
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def _rms(mats) -> float:
    mats = list(mats)
    if not mats:
        return 1.0
    total = sum(np.sum(np.abs(m) ** 2) for m in mats)
    size = sum(m.size for m in mats)
    return float(np.sqrt(total / size)) if total > 0 else 1.0


@dataclass(frozen=True)
class ScaledProblem:
    """Equivalent instance with unit power budget and unit-RMS channels.

    With ``F = sqrt(P_T) F'`` and each channel family divided by its RMS
    entry ``c``, rates are unchanged when the noise becomes
    ``sigma^2 / (c_H^2 P_T)``; energy and interference thresholds scale by
    ``1 / (c^2 P_T)``. Keeping all quantities O(1) keeps the Lagrange
    multipliers O(1) as well, which is what the ellipsoid radii assume.
    With ``normalize=False`` the original units are kept (``P = P_T``).

    Vacuous constraints (``E_th = 0`` or ``I_th = inf``) are dropped; the
    kept original indices are in ``eh_index`` and ``cr_index``. ``E`` holds
    the raw-scale energy targets ``E_th / rho``.
    """
    H: tuple
    G: tuple
    T: tuple
    sigma2: float
    E: np.ndarray
    I: np.ndarray
    N_I: int
    P: float
    power_scale: float
    eh_index: tuple
    cr_index: tuple

    @classmethod
    def build(cls, ch: ChannelSet, sc: NetworkScenario,
              normalize: bool = True) -> ScaledProblem:
        eh_index = tuple(i for i in range(sc.K_E) if sc.E_th[i] > 0)
        cr_index = tuple(j for j in range(sc.K_P) if np.isfinite(sc.I_th[j]))
        if any(sc.I_th[j] == 0 for j in cr_index):
            raise ValueError("zero interference thresholds must be removed by"
                             " null-space reduction first")
        if normalize:
            cH = _rms(ch.H)
            cG = _rms(ch.G[i] for i in eh_index)
            cT = _rms(ch.T[j] for j in cr_index)
            P = sc.P_T
        else:
            cH = cG = cT = 1.0
            P = 1.0
        return cls(
            H=tuple(Hk / cH for Hk in ch.H),
            G=tuple(ch.G[i] / cG for i in eh_index),
            T=tuple(ch.T[j] / cT for j in cr_index),
            sigma2=sc.sigma_n2 / (cH ** 2 * P),
            E=np.array([sc.E_eff[i] / (cG ** 2 * P) for i in eh_index]),
            I=np.array([sc.I_th[j] / (cT ** 2 * P) for j in cr_index]),
            N_I=sc.N_I,
            P=1.0 if normalize else sc.P_T,
            power_scale=float(np.sqrt(P)),
            eh_index=eh_index, cr_index=cr_index)

    @property
    def M(self) -> int:
        return self.H[0].shape[1]

    @property
    def K_I(self) -> int:
        return len(self.H)
