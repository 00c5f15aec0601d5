"""Jointly optimal precoding for a single information user.

With multipliers ``u = [nu, lambda, mu]`` on the power, energy and
interference constraints the Lagrangian is minimized in closed form:

    M(u) = nu I - sum_i lambda_i G_i^H G_i + sum_j mu_j T_j^H T_j
    M^-1/2 (H^H H / sigma^2) M^-1/2 = V Phi V^H
    F = M^-1/2 V_1 diag((w^1/2 phi^-1/2 - phi^-1)_+)^1/2

where ``V_1`` collects the ``N_I`` leading eigenvectors and ``w`` the
stream weights. The dual function is maximized with the ellipsoid method.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import ellipsoid
from .core import (ChannelSet, NetworkScenario, Precoder, ScaledProblem,
                   SolveReport, constraint_residuals, rates_nats)
from .errors import InfeasibleError, SingularMatrixError
from .matops import dft_matrix, herm_eig, inv_sqrt, pos_part_diag

__all__ = ['SumimoMode', 'JointDual', 'build_M', 'whitened_eig',
           'precoder_prop3', 'design_weights', 'algorithm2',
           'Algorithm2Options', 'stream_powers']


class SumimoMode(str, Enum):
    """Stream weighting: rate-maximizing or equal-MSE (QoS)."""
    MaxRate = 'MaxRate'
    QoS = 'QoS'


@dataclass(frozen=True)
class JointDual:
    """Multipliers ``[nu, lambda_1.., mu_1..]`` (all nonnegative)."""
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size < 1 or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("joint dual must be finite, nonnegative, length >= 1")
        object.__setattr__(self, 'values', v)


def _build_M(u, GG, TT, M):
    Mm = u[0] * np.eye(M, dtype=complex)
    K_E = len(GG)
    for i, A in enumerate(GG):
        Mm = Mm - u[1 + i] * A
    for j, A in enumerate(TT):
        Mm = Mm + u[1 + K_E + j] * A
    return Mm


def build_M(ud: JointDual, ch: ChannelSet) -> np.ndarray:
    """``nu I - sum lambda_i G_i^H G_i + sum mu_j T_j^H T_j``."""
    u = ud.values if isinstance(ud, JointDual) else np.asarray(ud, dtype=float)
    if u.size != 1 + len(ch.G) + len(ch.T):
        raise ValueError(f"dual vector has {u.size} entries, expected"
                         f" {1 + len(ch.G) + len(ch.T)}")
    M = ch.H[0].shape[1]
    return _build_M(u, [G.conj().T @ G for G in ch.G],
                    [T.conj().T @ T for T in ch.T], M)


def _whitened(Mm, A, N_I):
    B = inv_sqrt(Mm)
    V, phi = herm_eig(B @ A @ B)
    phi = np.maximum(phi, 0.0)
    M = Mm.shape[0]
    if N_I <= M:
        return B, V[:, :N_I], phi[:N_I]
    # more streams than antennas: the extra streams see a zero channel
    V1 = np.hstack([V, np.zeros((M, N_I - M))])
    return B, V1, np.concatenate([phi, np.zeros(N_I - M)])


def whitened_eig(Mm, ch: ChannelSet, sc: NetworkScenario):
    """Leading ``N_I`` eigenpairs of ``M^-1/2 H^H H M^-1/2 / sigma^2``.

    ``H`` stacks every information user's channel (a single user in the
    usual case). Returns ``(V1, phi1)`` with ``phi1`` descending.
    """
    H = np.vstack(ch.H)
    A = H.conj().T @ H / sc.sigma_n2
    _, V1, phi = _whitened(np.asarray(Mm), A, sc.N_I * len(ch.H))
    return V1, phi


def stream_powers(phi, w) -> np.ndarray:
    """Per-stream powers ``(w^1/2 phi^-1/2 - phi^-1)_+``; zero where ``phi = 0``."""
    phi = np.asarray(phi, dtype=float)
    w = np.asarray(w, dtype=float)
    p = np.zeros_like(phi)
    on = phi > 0
    p[on] = pos_part_diag(np.sqrt(w[on] / phi[on]) - 1.0 / phi[on])
    return p


def precoder_prop3(Mm, V1, Phi1, W) -> np.ndarray:
    """Closed-form Lagrangian minimizer ``M^-1/2 V1 diag(p)^1/2``.

    ``Phi1`` and ``W`` may be given as vectors or diagonal matrices.
    """
    phi = np.diag(Phi1) if np.ndim(Phi1) == 2 else np.asarray(Phi1, dtype=float)
    w = np.diag(W) if np.ndim(W) == 2 else np.asarray(W, dtype=float)
    if np.any(w <= 0):
        raise ValueError("stream weights must be positive")
    p = stream_powers(np.real(phi), np.real(w))
    return inv_sqrt(np.asarray(Mm)) @ (np.asarray(V1) * np.sqrt(p))


def design_weights(Phi1, mode: SumimoMode):
    """Stream weights ``W`` and output rotation ``D``.

    MaxRate uses ``w_k = max(phi_k, 1)`` and ``D = I``; QoS uses ``W = I``
    and the unitary DFT, which equalizes the per-stream MSEs.
    """
    phi = np.diag(Phi1) if np.ndim(Phi1) == 2 else np.asarray(Phi1, dtype=float)
    N = phi.size
    mode = SumimoMode(mode)
    if mode is SumimoMode.MaxRate:
        return np.diag(np.maximum(np.real(phi), 1.0)), np.eye(N, dtype=complex)
    return np.eye(N), dft_matrix(N)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Dual solve
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass
class Algorithm2Options:
    tol: float = 1e-14
    max_iter: int = 5000
    feas_rtol: float = 1e-9
    gap_rtol: float = 1e-11


class _P8:
    def __init__(self, prob: ScaledProblem, mode: SumimoMode, opt: Algorithm2Options):
        self.prob = prob
        self.mode = SumimoMode(mode)
        self.opt = opt
        H = np.vstack(prob.H)
        self.Ns = H.shape[0]
        self.A = H.conj().T @ H / prob.sigma2
        self.GG = [G.conj().T @ G for G in prob.G]
        self.TT = [T.conj().T @ T for T in prob.T]
        self.Mdim = H.shape[1]
        self.scale = 1.0 + herm_eig(self.A).phi[0]
        self.calls = 0

    @property
    def n(self):
        return 1 + len(self.GG) + len(self.TT)

    def primal(self, u):
        Mm = _build_M(u, self.GG, self.TT, self.Mdim)
        B, V1, phi = _whitened(Mm, self.A, self.Ns)
        W, D = design_weights(phi, self.mode)
        w = np.diag(W)
        p = stream_powers(phi, w)
        F = B @ (V1 * np.sqrt(p))
        # Lagrangian value at the minimizer; the -ln w - 1 offset makes the
        # MaxRate value equal to minus the rate on the unconstrained problem
        val = float(np.sum(w / (1 + phi * p) + p))
        if self.mode is SumimoMode.MaxRate:
            val -= float(np.sum(np.log(w) + 1))
        return F @ D, val

    def measures(self, F):
        pw = float(np.sum(np.abs(F) ** 2))
        eh = np.array([np.real(np.vdot(F, GG @ F)) for GG in self.GG])
        cr = np.array([np.real(np.vdot(F, TT @ F)) for TT in self.TT])
        return pw, eh, cr

    def evaluate(self, u):
        prob = self.prob
        F, val = self.primal(u)
        pw, eh, cr = self.measures(F)
        g = np.concatenate([[pw - prob.P], prob.E - eh, cr - prob.I])
        thr = np.concatenate([[prob.P], prob.E, prob.I])
        l = val - float(u @ np.concatenate([[prob.P], -prob.E, prob.I]))
        gap = -float(u @ g)
        feas = bool(np.all(g <= self.opt.feas_rtol * thr))
        return F, l, g, gap, feas

    def oracle(self, u):
        self.calls += 1
        Mm = _build_M(u, self.GG, self.TT, self.Mdim)
        phi, V = np.linalg.eigh(Mm)
        if phi[0] <= 1e-12 * max(u[0], 1.0):
            m = V[:, 0]
            normal = np.concatenate([[-1.0],
                                     [np.real(np.vdot(m, A @ m)) for A in self.GG],
                                     [-np.real(np.vdot(m, A @ m)) for A in self.TT]])
            return ellipsoid.OracleResponse.cut(normal)
        F, l, g, gap, feas = self.evaluate(u)
        cert = feas and abs(gap) <= self.opt.gap_rtol * max(1.0, abs(l))
        return ellipsoid.OracleResponse.objective(l, g, certified=cert)


def _reduce(ch: ChannelSet, sc: NetworkScenario):
    from .mumimo import reduce_zero_interference
    return reduce_zero_interference(ch, sc)


def algorithm2(ch: ChannelSet, sc: NetworkScenario,
               mode: SumimoMode = SumimoMode.MaxRate,
               tols: Algorithm2Options | None = None):
    """Globally optimal single-user design through the joint dual.

    Several information users may be passed; their channels are stacked
    into one macro user with ``K_I N_I`` antennas (this is how the
    cooperative outer bound is computed).

    Returns
    -------
    Precoder, SolveReport
        The precoder has ``K_I N_I`` columns. ``objective_trace`` is the
        running best dual value; ``extras`` holds the final multipliers
        (normalized units), the duality gap and the rate in bits.
    """
    opt = tols or Algorithm2Options()
    ch.validate(sc)
    t0 = time.perf_counter()
    ch_r, sc_r, U = _reduce(ch, sc)
    prob = ScaledProblem.build(ch_r, sc_r)
    for G, E in zip(prob.G, prob.E):
        if E > herm_eig(G.conj().T @ G).phi[0] * (1 + 1e-9):
            raise InfeasibleError("energy target exceeds the single-user maximum")
    d = _P8(prob, mode, opt)
    z0 = np.zeros(d.n)
    z0[0] = 1.0
    thr = np.concatenate([prob.E, prob.I])
    small = min(1.0, float(np.min(thr))) if thr.size else 1.0
    r0 = 10.0 * d.scale / max(small, 1e-12) + 1.0
    res = ellipsoid.maximize_with_restarts(
        d.oracle, z0, r0=r0, tol=opt.tol * d.scale, max_iter=opt.max_iter,
        nonneg=True)
    if not res.feasible:
        raise InfeasibleError("no dual-feasible multiplier found")
    u = np.maximum(res.z, 0.0)
    try:
        F, l, g, gap, feas = d.evaluate(u)
    except SingularMatrixError:
        raise InfeasibleError("dual optimum sits on a singular M; thresholds"
                              " are likely infeasible")
    if not feas and not res.certified:
        # the energy dual grows without bound when the targets are unreachable
        eh_short = np.any(g[1:1 + len(prob.E)] > 1e-3 * prob.E)
        if eh_short:
            raise InfeasibleError("energy targets are unreachable")
    F_full = U @ (prob.power_scale * F)
    # the dual point is accurate to ~1e-7; scale onto the power/CR limits so
    # the returned precoder is feasible (costs at most that much energy)
    ratio = sc.P_T / float(np.sum(np.abs(F_full) ** 2))
    for T, I in zip(ch.T, sc.I_th):
        leak = float(np.sum(np.abs(T @ F_full) ** 2))
        if np.isfinite(I) and I > 0 and leak > 0:
            ratio = min(ratio, I / leak)
    restore = min(1.0, float(np.sqrt(ratio)))
    F_full = restore * F_full
    rates = rates_nats(np.hstack([F_full]), [np.vstack(ch.H)], sc.sigma_n2,
                       sc.N_I * sc.K_I) / np.log(2)
    status = 'converged' if res.status == 'converged' else 'max-iter'
    report = SolveReport(
        objective_trace=res.trace or [l],
        constraint_residuals=constraint_residuals(
            F_full, ChannelSet(H=[ch.H_stack], G=ch.G, T=ch.T),
            sc.replace(K_I=1, N_I=sc.N_I * sc.K_I, alpha=(1.0,))),
        inner_iterations=res.iterations, outer_iterations=1, status=status,
        extras={'u': u, 'gap': gap, 'restore_scale': restore, 'dual_value': l, 'certified': res.certified,
                'rate_bits': float(rates[0]), 'wall_s': time.perf_counter() - t0})
    return Precoder(F_full, sc.N_I * sc.K_I), report
