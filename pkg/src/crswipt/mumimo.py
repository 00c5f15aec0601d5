"""Sum-utility precoding for the multi-user downlink via weighted MMSE.

Utility maximization is recast as a weighted-MSE problem in the
unnormalized precoder ``F_bar``, a power normalizer ``gamma``, receive
filters ``L_k`` and weights ``W_k``. For fixed ``(L, W)`` the problem in
``(F_bar, gamma)`` is solved exactly through its Lagrange dual over the
energy and interference multipliers ``u = [lambda, mu]``:

    K(u) = Y - sum_i lambda_i Z_E,i + sum_j mu_j Z_P,j
    F_bar(u) = K(u)^-1 B
    h(u) = sum_k tr(W_k) + e_k(W_k) - Re tr(B^H K(u)^-1 B)

with ``B = (LH)^H W`` and ``Y = (LH)^H W (LH) + (beta / P) I``. The outer
loop alternates receiver, weight, precoder and normalizer updates from
several random starts and keeps the best result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import brentq

from . import ellipsoid
from .core import (ChannelSet, NetworkScenario, Precoder, ScaledProblem,
                   SolveReport, Utility, constraint_residuals, rate_per_user,
                   sum_utility, RATE_FLOOR_BITS, LN2)
from .errors import InfeasibleError
from .matops import herm_eig, null_space_basis

__all__ = ['WmmseState', 'DualVector', 'receiver_update', 'mse_matrices',
           'weight_update', 'utility_offset', 'gamma_update', 'dual_solve_P5',
           'algorithm1', 'reduce_zero_interference', 'P5Result',
           'Algorithm1Options']

RATE_FLOOR_NATS = RATE_FLOOR_BITS * LN2
#: CR terms weaker than this (relative) are treated as inactive in gamma.
GAMMA_SKIP_RTOL = 1e-15


@dataclass
class WmmseState:
    """Iterate of the alternating loop.

    ``L`` and ``W`` are lists of per-user ``N_I x N_I`` blocks.
    """
    F_bar: np.ndarray
    gamma: float
    L: list | None = None
    W: list | None = None
    beta: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class DualVector:
    """Nonnegative Lagrange multipliers ``[lambda_1.., mu_1..]``."""
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("multipliers must be finite and nonnegative")
        object.__setattr__(self, 'values', v)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Kernels on raw arrays (shared by the public wrappers and the solver)
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def _receivers(H, Fb, gamma, sigma2, N):
    """MMSE receivers and the matching MSE matrices ``I - S^H R^-1 S``."""
    Ls, Cs = [], []
    for k, Hk in enumerate(H):
        HF = Hk @ Fb
        S = HF[:, k * N:(k + 1) * N]
        R = HF @ HF.conj().T + (sigma2 / gamma ** 2) * np.eye(Hk.shape[0])
        X = np.linalg.solve(R, S)
        L = X.conj().T
        C = np.eye(N) - S.conj().T @ X
        Ls.append(L)
        Cs.append(0.5 * (C + C.conj().T))
    return Ls, Cs


def _mse(H, Fb, gamma, sigma2, Ls, N):
    """MSE matrices for arbitrary receivers."""
    Cs = []
    for k, (Hk, L) in enumerate(zip(H, Ls)):
        LHF = L @ (Hk @ Fb)
        D = LHF[:, k * N:(k + 1) * N]
        C = (LHF @ LHF.conj().T + (sigma2 / gamma ** 2) * (L @ L.conj().T)
             - D - D.conj().T + np.eye(N))
        Cs.append(0.5 * (C + C.conj().T))
    return Cs


def _logdet(A):
    sign, ld = np.linalg.slogdet(A)
    return ld


def _weights(Cs, kind, alpha):
    """Weights, offsets and the (nats) rates that produced them."""
    Ws, es, rates = [], [], []
    for k, C in enumerate(Cs):
        N = C.shape[0]
        Cinv = np.linalg.inv(C)
        Cinv = 0.5 * (Cinv + Cinv.conj().T)
        R = max(-_logdet(C), RATE_FLOOR_NATS)
        if kind == 'WSR':
            a = alpha[k]
            W = a * Cinv
            e = a * (N * np.log(a) - _logdet(W) - N) if a > 0 else 0.0
        elif kind == 'PF':
            W = Cinv / R
            e = -np.log(R) - N / R
        else:
            W = Cinv / R ** 2
            e = 1.0 / R - N / R ** 2
        Ws.append(W)
        es.append(e)
        rates.append(R)
    return Ws, np.array(es), np.array(rates)


def _gamma(Fb, T, I, P):
    pw = float(np.sum(np.abs(Fb) ** 2))
    if pw <= 0:
        raise ValueError("gamma is undefined for a zero precoder")
    ratio = P / pw
    for Tj, Ij in zip(T, I):
        v = float(np.sum(np.abs(Tj @ Fb) ** 2))
        if v <= GAMMA_SKIP_RTOL * pw * np.sum(np.abs(Tj) ** 2):
            continue
        if Ij == 0:
            raise ValueError("zero interference threshold with a non-null beam;"
                             " reduce to the null space first")
        ratio = min(ratio, Ij / v)
    return float(np.sqrt(ratio))


def _f0(Ws, es, Cs):
    return float(sum(np.real(np.trace(W @ C)) for W, C in zip(Ws, Cs)) + np.sum(es))


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Public single-step operations
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def receiver_update(st: WmmseState, ch: ChannelSet, sc: NetworkScenario) -> list:
    """MMSE receivers ``L_k`` for the current ``(F_bar, gamma)``.

    ``L_k = F_k^H H_k^H (sum_m H_k F_m F_m^H H_k^H + gamma^-2 sigma^2 I)^-1``
    with ``F`` the unnormalized blocks.
    """
    Fb = np.asarray(st.F_bar, dtype=complex)
    if not np.all(np.isfinite(Fb)):
        raise ValueError("non-finite precoder")
    ch.validate(sc)
    Ls, _ = _receivers(ch.H, Fb, st.gamma, sc.sigma_n2, sc.N_I)
    return Ls


def mse_matrices(st: WmmseState, ch: ChannelSet, sc: NetworkScenario,
                 L: list | None = None) -> list:
    """Per-user MSE matrices for the receivers ``L`` (default: ``st.L``)."""
    L = st.L if L is None else L
    return _mse(ch.H, np.asarray(st.F_bar, dtype=complex), st.gamma,
                sc.sigma_n2, L, sc.N_I)


def weight_update(C_L: list, u: Utility, alpha=None) -> list:
    """MSE weights for the selected utility.

    With ``R = -ln det C`` (nats): WSR gives ``alpha C^-1``, PF
    ``(R C)^-1`` and HMR ``(R^2 C)^-1``. Rates are floored at
    ``RATE_FLOOR_BITS`` so a vanishing rate never divides by zero.
    """
    K = len(C_L)
    a = u.weights(K) if alpha is None else np.asarray(alpha, dtype=float)
    for C in C_L:
        if np.linalg.eigvalsh(0.5 * (C + C.conj().T))[0] <= 0:
            raise ValueError("MSE matrix is not positive definite")
    Ws, _, _ = _weights([np.atleast_2d(np.asarray(C, dtype=complex)) for C in C_L],
                        u.kind, a)
    return Ws


def utility_offset(W, u: Utility, alpha: float = 1.0, rate: float | None = None) -> float:
    """Offset ``e(W)`` making ``min_W tr(W C) + e(W)`` equal ``-U(R)``.

    For PF and HMR the rate that produced ``W`` may be passed; otherwise it
    is recovered from ``ln det W`` on the branch where the utility is
    concave in the MSE matrix (``R > N`` for PF, ``R > 2N`` for HMR).
    """
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    N = W.shape[0]
    if u.kind == 'WSR':
        return float(alpha * (N * np.log(alpha) - _logdet(W) - N)) if alpha > 0 else 0.0
    ld = _logdet(W)
    p = 1 if u.kind == 'PF' else 2
    if rate is None:
        # ln det W = R - p N ln R, increasing in R for R > p N
        fn = lambda R: R - p * N * np.log(R) - ld
        lo = p * N
        if fn(lo) > 0:
            raise ValueError("weight matrix is outside the concave branch")
        hi = max(2 * lo, 1.0)
        while fn(hi) < 0:
            hi *= 2
        rate = brentq(fn, lo, hi, xtol=1e-14, rtol=1e-15)
    if u.kind == 'PF':
        return float(-np.log(rate) - N / rate)
    return float(1.0 / rate - N / rate ** 2)


def gamma_update(F_bar, ch: ChannelSet, sc: NetworkScenario) -> float:
    """Largest ``gamma`` keeping ``gamma F_bar`` within the power and CR limits.

    CR terms with negligible leakage (``||T_j F_bar||^2 <= 1e-15 ||F_bar||^2
    ||T_j||_F^2``) are skipped, as are infinite thresholds.
    """
    Fb = np.asarray(F_bar, dtype=complex)
    T = [ch.T[j] for j in range(sc.K_P) if np.isfinite(sc.I_th[j])]
    I = [sc.I_th[j] for j in range(sc.K_P) if np.isfinite(sc.I_th[j])]
    return _gamma(Fb, T, I, sc.P_T)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Dual solve for fixed (L, W)
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass
class P5Result:
    """Outcome of one dual solve.

    ``f0`` is the weighted-MSE objective at ``(gamma, F_bar)``; ``h`` the
    dual value at ``u``. ``eh_ok`` tells whether ``gamma F_bar`` meets the
    energy targets within ``eh_rtol``.
    """
    F_bar: np.ndarray
    u: np.ndarray
    gamma: float
    f0: float
    h: float
    iterations: int
    certified: bool
    eh_ok: bool
    status: str

    @property
    def gap(self) -> float:
        return self.f0 - self.h


class _P5:
    """Oracle and bookkeeping of the dual problem for fixed ``(L, W)``."""

    def __init__(self, prob: ScaledProblem, Ls, Ws, offset, eh_rtol, gap_rtol):
        self.prob = prob
        P = prob.P
        M = prob.M
        LH = np.vstack([L @ H for L, H in zip(Ls, prob.H)])
        Wb = block_diag(*Ws)
        self.B = LH.conj().T @ Wb
        self.beta = float(prob.sigma2 * sum(np.real(np.trace(W @ L @ L.conj().T))
                                            for W, L in zip(Ws, Ls)))
        A = self.B @ LH
        self.Y = 0.5 * (A + A.conj().T) + (self.beta / P) * np.eye(M)
        self.GG = [G.conj().T @ G for G in prob.G]
        self.TT = [T.conj().T @ T for T in prob.T]
        self.ZE = [GG - (E / P) * np.eye(M) for GG, E in zip(self.GG, prob.E)]
        self.ZP = [TT - (I / P) * np.eye(M) for TT, I in zip(self.TT, prob.I)]
        self.Z = np.array([-Z for Z in self.ZE] + self.ZP) if self.ZE or self.ZP \
            else np.zeros((0, M, M))
        self.thr = np.concatenate([-prob.E, prob.I]) if self.Z.size else np.zeros(0)
        self.const = float(sum(np.real(np.trace(W)) for W in Ws) + offset)
        self.eh_rtol = eh_rtol
        self.gap_rtol = gap_rtol
        self.scale = float(np.linalg.norm(self.Y, 2))
        self.calls = 0
        self.Zflat = self.Z.reshape(self.Z.shape[0], M * M)
        # stacked EH then CR channels; row blocks give per-constraint energies
        mats = list(prob.G) + list(prob.T)
        self.stack = np.vstack(mats) if mats else np.zeros((0, M))
        self.starts = np.cumsum([0] + [m.shape[0] for m in mats])[:-1]
        self.n_eh = len(prob.G)
        self.T_norm2 = np.array([np.sum(np.abs(T) ** 2) for T in prob.T])

    @property
    def n(self):
        return self.Z.shape[0]

    def K(self, u):
        if self.n == 0:
            return self.Y
        M = self.Y.shape[0]
        return self.Y + (u @ self.Zflat).reshape(M, M)

    def evaluate(self, u, phi=None, V=None):
        """Primal point, dual value, supergradient and gap at a feasible ``u``."""
        prob = self.prob
        P = prob.P
        if V is None:
            phi, V = np.linalg.eigh(self.K(u))
        Fb = (V / phi) @ (V.conj().T @ self.B)
        h = self.const - float(np.real(np.vdot(self.B, Fb)))
        pw = float(np.sum(Fb.real ** 2 + Fb.imag ** 2))
        if self.n:
            X = self.stack @ Fb
            rows = np.sum(X.real ** 2 + X.imag ** 2, axis=1)
            vals = np.add.reduceat(rows, self.starts)
        else:
            vals = np.zeros(0)
        eh, cr = vals[:self.n_eh], vals[self.n_eh:]
        g = np.concatenate([prob.E * (pw / P) - eh, cr - prob.I * (pw / P)])
        t = pw / P
        if cr.size:
            on = cr > GAMMA_SKIP_RTOL * pw * self.T_norm2
            if on.any():
                t = max(t, float(np.max(cr[on] / prob.I[on])))
        gap = self.beta * (t - pw / P) - float(u @ g)
        f0 = h + gap
        eh_ok = bool(np.all(eh >= prob.E * t * (1 - self.eh_rtol)))
        return Fb, h, g, f0, gap, t, eh_ok

    def point(self, u):
        """``evaluate`` plus the certificate, or None outside the dual domain."""
        if self.n and self.beta - float(u @ self.thr) < 0:
            return None
        phi, V = np.linalg.eigh(self.K(u))
        if phi[0] <= 1e-12 * self.scale:
            return None
        Fb, h, g, f0, gap, t, eh_ok = self.evaluate(u, phi, V)
        cert = eh_ok and abs(gap) <= self.gap_rtol * max(1.0, abs(f0))
        return Fb, h, g, cert, (V / phi) @ V.conj().T

    def newton(self, u, max_steps=40):
        """Projected Newton ascent on the smooth dual; returns a certified ``u`` or None.

        With ``F = K^-1 B`` the Hessian is ``-2 Re tr(F^H Z_a K^-1 Z_b F)``.
        Coordinates at zero with a nonpositive gradient stay fixed.
        """
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        pt = self.point(u)
        for _ in range(max_steps):
            self.calls += 1
            if pt is None:
                return None
            Fb, h, g, cert, Kinv = pt
            if cert:
                return u
            free = (u > 0) | (g > 0)
            if not free.any():
                return None
            ZF = self.Z[free] @ Fb
            H = -2.0 * np.real(np.einsum('aij,bij->ab', ZF.conj(), Kinv @ ZF))
            try:
                step = np.linalg.solve(H, -g[free])
            except np.linalg.LinAlgError:
                return None
            full = np.zeros_like(u)
            full[free] = step
            s = 1.0
            while True:
                un = np.maximum(u + s * full, 0.0)
                pn = self.point(un)
                if pn is not None and pn[1] >= h - 1e-13 * max(1.0, abs(h)):
                    break
                s *= 0.5
                if s < 1e-10:
                    return None
            u, pt = un, pn
        return None

    def oracle(self, u):
        self.calls += 1
        if self.n == 0:
            raise RuntimeError("no multipliers")
        nu_num = self.beta - float(u @ self.thr)
        if nu_num < 0:
            # implicit power multiplier (beta + lambda E - mu I) / P must stay >= 0
            return ellipsoid.OracleResponse.cut(self.thr.copy())
        phi, V = np.linalg.eigh(self.K(u))
        if phi[0] <= 1e-12 * self.scale:
            k = V[:, 0]
            normal = -np.array([np.real(np.vdot(k, Z @ k)) for Z in self.Z])
            return ellipsoid.OracleResponse.cut(normal)
        Fb, h, g, f0, gap, t, eh_ok = self.evaluate(u, phi, V)
        cert = eh_ok and abs(gap) <= self.gap_rtol * max(1.0, abs(f0))
        return ellipsoid.OracleResponse.objective(h, g, certified=cert)


def _solve_p5(prob: ScaledProblem, Ls, Ws, offset=0.0, u0=None, r0=None,
              tol=1e-15, max_iter=5000, eh_rtol=1e-7, gap_rtol=1e-10,
              loc_tol=1e-3) -> P5Result:
    d = _P5(prob, Ls, Ws, offset, eh_rtol, gap_rtol)
    n = d.n
    if n == 0:
        u = np.zeros(0)
        Fb, h, g, f0, gap, t, eh_ok = d.evaluate(u)
        return P5Result(Fb, u, float(1 / np.sqrt(t)), f0, h, 1, True, True, 'converged')
    # u = 0 is optimal when its supergradient points out of the orthant
    u = np.zeros(n)
    Fb, h, g, f0, gap, t, eh_ok = d.evaluate(u)
    if np.all(g <= 0):
        return P5Result(Fb, u, float(1 / np.sqrt(t)), f0, h, 1, True, eh_ok, 'converged')
    r_cold = 10.0 * d.scale / max(min(np.min(np.abs(d.thr)), 1.0), 1e-12) + 1.0
    if u0 is None or r0 is None:
        u0, r0 = np.zeros(n), r_cold
    # localize with the ellipsoid method, then polish with Newton steps;
    # a strict ellipsoid run is the fallback when polishing fails
    res = ellipsoid.maximize_with_restarts(
        d.oracle, u0, r0=r0, tol=loc_tol * max(1.0, abs(h)), max_iter=max_iter,
        nonneg=True)
    if not res.feasible:
        raise InfeasibleError("no dual-feasible multiplier found")
    u, cert, status = np.maximum(res.z, 0.0), res.certified, res.status
    if not cert:
        un = d.newton(u)
        if un is not None:
            u, cert, status = un, True, 'converged'
    if not cert:
        r_fb = max(np.linalg.norm(u), 1e-6 * r_cold)
        res = ellipsoid.maximize_with_restarts(
            d.oracle, u, r0=r_fb, tol=tol * max(1.0, abs(h)), max_iter=max_iter,
            nonneg=True)
        if res.feasible:
            u, cert, status = np.maximum(res.z, 0.0), res.certified, res.status
            if not cert:
                un = d.newton(u)
                if un is not None:
                    u, cert, status = un, True, 'converged'
    Fb, h, g, f0, gap, t, eh_ok = d.evaluate(u)
    return P5Result(Fb, u, float(1 / np.sqrt(t)), f0, h, d.calls,
                    cert, eh_ok, status)


def dual_solve_P5(L, W, ch: ChannelSet, sc: NetworkScenario, tol: float = 1e-12,
                  offset: float = 0.0, max_iter: int = 5000):
    """Solve the weighted-MSE precoder problem for fixed receivers and weights.

    Parameters
    ----------
    L, W : list of np.ndarray
        Per-user receivers and (Hermitian PD) weights.
    ch, sc : ChannelSet, NetworkScenario
        Zero interference thresholds must be removed first (see
        :func:`reduce_zero_interference`).
    tol : float
        Ellipsoid width tolerance relative to the dual value.
    offset : float
        ``sum_k e_k(W_k)``; only shifts the reported objective values.

    Returns
    -------
    F_bar : np.ndarray
        Unnormalized precoder minimizing the Lagrangian at the dual optimum.
    u : DualVector
        Multipliers ``[lambda, mu]`` of the kept (non-vacuous) constraints.
    report : SolveReport
        ``extras`` holds ``f0``, ``h``, ``gamma`` and ``beta``.

    Raises
    ------
    InfeasibleError
        When the dual drifts off without reaching the energy targets.
    """
    ch.validate(sc)
    prob = ScaledProblem.build(ch, sc, normalize=False)
    r = _solve_p5(prob, L, W, offset=offset, tol=tol, max_iter=max_iter)
    if not r.eh_ok:
        raise InfeasibleError("no precoder direction meets the energy and"
                              " interference constraints together")
    res = constraint_residuals(r.gamma * r.F_bar, ch, sc)
    d = _P5(prob, L, W, offset, 0, 0)
    report = SolveReport(
        objective_trace=(r.h,), constraint_residuals=res,
        inner_iterations=r.iterations, outer_iterations=0,
        status='converged' if r.status == 'converged' else 'max-iter',
        extras={'f0': r.f0, 'h': r.h, 'gamma': r.gamma, 'beta': d.beta,
                'certified': r.certified})
    return r.F_bar, DualVector(r.u), report


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Zero-interference reduction
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def reduce_zero_interference(ch: ChannelSet, sc: NetworkScenario, zero_set=None):
    """Restrict transmission to the null space of the zero-forced P-ID channels.

    Parameters
    ----------
    zero_set : iterable of int, optional
        Primary users to null; defaults to those with ``I_th == 0``.

    Returns
    -------
    ch_r, sc_r : ChannelSet, NetworkScenario
        Problem in ``M' = M - rank`` antennas with the nulled users removed.
    U : np.ndarray
        ``M x M'`` orthonormal basis; lift with ``F = U @ F_r``.
    """
    if zero_set is None:
        zero_set = [j for j in range(sc.K_P) if sc.I_th[j] == 0]
    zero_set = sorted(set(int(j) for j in zero_set))
    if any(j < 0 or j >= sc.K_P for j in zero_set):
        raise IndexError("zero_set index out of range")
    if not zero_set:
        return ch, sc, np.eye(sc.M, dtype=complex)
    U = null_space_basis(np.vstack([ch.T[j] for j in zero_set]))
    keep = [j for j in range(sc.K_P) if j not in zero_set]
    ch_r = ChannelSet(H=[H @ U for H in ch.H], G=[G @ U for G in ch.G],
                      T=[ch.T[j] @ U for j in keep])
    sc_r = sc.replace(M=U.shape[1], K_P=len(keep), I_th=sc.I_th[keep])
    return ch_r, sc_r, U


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# Algorithm 1
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass
class Algorithm1Options:
    """Tolerances of the alternating loop and the inner dual solves."""
    tol: float = 1e-5
    max_outer: int = 200
    inner_tol: float = 1e-15
    loc_tol: float = 1e-3
    inner_max_iter: int = 5000
    eh_rtol: float = 1e-7
    gap_rtol: float = 1e-10


@dataclass
class _Candidate:
    F: np.ndarray
    trace: list
    inner: list
    gaps: list = field(default_factory=list)
    status: str = 'max-iter'
    outer: int = 0
    feasible: bool = False


def _run_candidate(prob: ScaledProblem, Fb, kind, alpha, opt: Algorithm1Options):
    N = prob.N_I
    gamma = _gamma(Fb, prob.T, prob.I, 1.0)
    cand = _Candidate(F=gamma * Fb, trace=[], inner=[])
    u_prev = None
    f_prev = None
    misses = 0
    prev_guarded = False
    for it in range(opt.max_outer):
        Ls, Cs = _receivers(prob.H, Fb, gamma, prob.sigma2, N)
        Ws, es, R = _weights(Cs, kind, alpha)
        # the weight step minimizes the surrogate only where the utility is
        # concave in the MSE matrix; descent is guaranteed from there on
        guarded = kind == 'WSR' or bool(np.all(R >= (1 if kind == 'PF' else 2) * N))
        r0 = None
        if u_prev is not None and np.any(u_prev > 0):
            r0 = max(0.5 * np.linalg.norm(u_prev), 1e-6)
        r = _solve_p5(prob, Ls, Ws, offset=float(np.sum(es)),
                      u0=u_prev if r0 else None, r0=r0, tol=opt.inner_tol,
                      loc_tol=opt.loc_tol,
                      max_iter=opt.inner_max_iter, eh_rtol=opt.eh_rtol,
                      gap_rtol=opt.gap_rtol)
        cand.inner.append(r.iterations)
        cand.gaps.append((r.f0, r.h, r.certified))
        if not r.eh_ok:
            misses += 1
            if cand.feasible:
                cand.status = 'converged'
                break
            if misses >= 3:
                # the dual keeps failing to reach the energy targets
                cand.status = 'infeasible'
                break
        elif f_prev is not None and cand.feasible and guarded and prev_guarded \
                and r.f0 > f_prev:
            cand.status = 'converged'
            break
        Fb, gamma, u_prev = r.F_bar, r.gamma, r.u
        cand.outer = it + 1
        if r.eh_ok:
            cand.F = gamma * Fb
            first = not cand.feasible
            cand.feasible = True
            cand.trace.append(r.f0)
            if not first and abs(f_prev - r.f0) <= opt.tol * max(abs(f_prev), 1e-300):
                cand.status = 'converged'
                f_prev = r.f0
                break
            f_prev, prev_guarded = r.f0, guarded
    return cand


def _necessary_energy_check(prob: ScaledProblem):
    for i, (G, E) in enumerate(zip(prob.G, prob.E)):
        top = herm_eig(G.conj().T @ G).phi[0]
        if E > prob.P * top * (1 + 1e-9):
            raise InfeasibleError(
                f"energy target of EH user {prob.eh_index[i]} exceeds the"
                f" largest achievable value")


def algorithm1(ch: ChannelSet, sc: NetworkScenario, u: Utility | None = None,
               N_G: int = 100, seeds=0, tols: Algorithm1Options | None = None,
               init: list | None = None):
    """Multi-start weighted-MMSE design of the stacked precoder.

    Parameters
    ----------
    ch, sc : ChannelSet, NetworkScenario
    u : Utility
        Target sum utility (default WSR with the scenario weights).
    N_G : int
        Number of random starts (i.i.d. CN(0, 1) entries).
    seeds : int or np.random.SeedSequence
        Master seed; start ``n`` uses the ``n``-th spawned child.
    tols : Algorithm1Options
    init : list of np.ndarray, optional
        Extra starting precoders (M x K_I N_I, original antenna space), run
        after the random starts.

    Returns
    -------
    Precoder, SolveReport
        The report's ``objective_trace`` is the weighted-MSE objective per
        outer iteration of the winning start; ``extras['candidates']``
        holds every start's trace, inner iteration counts and
        ``(f0, h, certified)`` triples of each inner solve.

    Raises
    ------
    InfeasibleError
        If an energy target exceeds its single-user maximum or no start
        reaches a feasible point.
    """
    u = u or Utility()
    opt = tols or Algorithm1Options()
    ch.validate(sc)
    alpha = u.weights(sc.K_I, sc)
    t_start = time.perf_counter()

    ch_r, sc_r, U = reduce_zero_interference(ch, sc)
    prob = ScaledProblem.build(ch_r, sc_r)
    _necessary_energy_check(prob)
    M_r, KN = sc_r.M, sc.K_I * sc.N_I

    ss = seeds if isinstance(seeds, np.random.SeedSequence) \
        else np.random.SeedSequence(int(seeds) % 2 ** 64)
    starts = []
    for child in ss.spawn(N_G):
        rng = np.random.default_rng(child)
        starts.append((rng.standard_normal((M_r, KN))
                       + 1j * rng.standard_normal((M_r, KN))) / np.sqrt(2))
    for F0 in init or []:
        F0 = np.asarray(F0, dtype=complex)
        if F0.shape != (sc.M, KN):
            raise ValueError(f"initial precoder has shape {F0.shape}")
        starts.append(U.conj().T @ F0 / prob.power_scale)

    cands, best, best_val = [], None, -np.inf
    for Fb in starts:
        if not np.any(Fb):
            continue
        try:
            c = _run_candidate(prob, Fb, u.kind, alpha, opt)
        except InfeasibleError:
            c = _Candidate(F=np.zeros((M_r, KN)), trace=[], inner=[], status='infeasible')
        cands.append(c)
        if not c.feasible:
            continue
        F = U @ (prob.power_scale * c.F)
        rates = rate_per_user(F, ch, sc)
        val = sum_utility(np.maximum(rates, RATE_FLOOR_BITS), u, alpha)
        if val > best_val:
            best, best_val = (c, F), val

    if best is None:
        raise InfeasibleError("no start reached a point meeting the energy targets")
    c, F = best
    report = SolveReport(
        objective_trace=c.trace,
        constraint_residuals=constraint_residuals(F, ch, sc),
        inner_iterations=int(sum(c.inner)),
        outer_iterations=c.outer,
        status='converged' if c.status == 'converged' else 'max-iter',
        extras={'candidates': [{'trace': x.trace, 'inner': x.inner,
                                'gaps': x.gaps, 'status': x.status}
                               for x in cands],
                'utility': best_val,
                'wall_s': time.perf_counter() - t_start})
    return Precoder(F, sc.N_I), report
