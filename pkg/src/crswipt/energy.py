"""Achievable energy region under interference constraints.

The weighted sum of harvested energies is maximized over transmit
covariances with ``trace(S) <= P_T`` and ``trace(T_j S T_j^H) <= I_j``.
Its Lagrange dual in the interference multipliers ``mu`` is

    g(mu) = -P_T * delta_max(sum_i w_i G_i^H G_i - sum_j mu_j T_j^H T_j)
            - sum_j mu_j I_j,

and the optimum is attained by a rank-one beam ``f = sqrt(P_T) p`` with
``p`` a unit top eigenvector of the matrix above.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from . import ellipsoid
from .core import ChannelSet, NetworkScenario
from .errors import DegenerateEigenspaceError, InfeasibleError
from .matops import herm_eig

__all__ = ['EnergyWeights', 'EnergyRegionPoint', 'FeasibilityResult',
           'max_weighted_energy', 'check_feasibility', 'simplex_grid',
           'energy_region']

#: Eigenvalues within this relative distance of the largest are treated as tied.
CLUSTER_RTOL = 1e-6
#: Relative interference slack accepted when recovering the primal beam.
CR_RTOL = 1e-5


@dataclass(frozen=True)
class EnergyWeights:
    """Point ``w`` of the probability simplex."""
    w: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in np.ravel(self.w))
        if not w or min(w) < 0 or abs(sum(w) - 1.0) > 1e-10:
            raise ValueError(f"weights {w} are not on the simplex")
        object.__setattr__(self, 'w', w)

    @classmethod
    def uniform(cls, K_E: int) -> EnergyWeights:
        return cls(tuple(np.full(K_E, 1.0 / K_E)))


@dataclass(frozen=True)
class EnergyRegionPoint:
    """Boundary point of the energy region.

    ``energies`` are post-efficiency (``rho``-scaled) watts. ``mu`` are the
    interference multipliers in original units (zero for dropped or
    zero-forced constraints). ``dual_value`` is ``-g(mu)``, which equals
    the weighted raw energy ``sum w_i ||G_i f||^2`` at optimality.
    """
    f: np.ndarray
    energies: np.ndarray
    mu: np.ndarray
    weights: EnergyWeights
    dual_value: float
    iterations: int = 0
    status: str = 'converged'


def _restricted_beam(Vc, Ts, I, mu):
    """Unit vector in span(Vc) making active constraints tight, others feasible.

    Inside a tied top eigenspace the weighted energy equals
    ``delta + sum mu_j ||T_j f||^2``, so each constraint with ``mu_j > 0``
    should be met with equality.
    """
    d = Vc.shape[1]
    Bs = [Vc.conj().T @ (T.conj().T @ T) @ Vc for T in Ts]
    active = [j for j in range(len(Ts)) if mu[j] > 0]

    def ok(c):
        return all(np.real(c.conj() @ B @ c) <= I[j] * (1 + CR_RTOL)
                   for j, B in enumerate(Bs))

    if len(active) <= 1:
        if not active:
            # least interference-weighted direction that is feasible
            Bsum = sum(B / I[j] for j, B in enumerate(Bs))
            c = herm_eig(Bsum).V[:, -1]
            if ok(c):
                return c
        else:
            j = active[0]
            V, b = herm_eig(Bs[j])
            if b[0] <= I[j]:
                c = V[:, 0]
            elif b[-1] >= I[j]:
                c = V[:, -1]
            else:
                s2 = (I[j] - b[-1]) / (b[0] - b[-1])
                c = np.sqrt(1 - s2) * V[:, -1] + np.sqrt(s2) * V[:, 0]
            if ok(c):
                return c

    # general case: nonlinear least squares over unit coefficient vectors
    def resid(x):
        c = x[:d] + 1j * x[d:]
        nrm = np.linalg.norm(c)
        c = c / nrm if nrm > 0 else c
        r = []
        for j, B in enumerate(Bs):
            v = np.real(c.conj() @ B @ c) - I[j]
            r.append(v if j in active else max(v, 0.0))
        return np.array(r + [nrm - 1.0])

    rng = np.random.default_rng(0)
    for _ in range(20):
        x0 = rng.standard_normal(2 * d)
        sol = least_squares(resid, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14)
        c = sol.x[:d] + 1j * sol.x[d:]
        c = c / np.linalg.norm(c)
        if ok(c) and all(np.real(c.conj() @ Bs[j] @ c) >= I[j] * (1 - 1e-6)
                         for j in active):
            return c
    raise DegenerateEigenspaceError(
        f"no vector of the {d}-dimensional top eigenspace meets the"
        f" {len(active)} active interference constraints")


def _scaled(mats):
    mats = list(mats)
    if not mats:
        return 1.0
    tot = sum(np.sum(np.abs(m) ** 2) for m in mats)
    return float(np.sqrt(tot / sum(m.size for m in mats))) if tot > 0 else 1.0


def max_weighted_energy(ch: ChannelSet, sc: NetworkScenario, w,
                        tol: float = 1e-14, max_iter: int = 5000) -> EnergyRegionPoint:
    """Beam maximizing ``sum w_i rho ||G_i f||^2`` under power and CR limits.

    Zero interference thresholds are enforced exactly through null-space
    reduction; infinite thresholds are ignored.

    Parameters
    ----------
    ch, sc : ChannelSet, NetworkScenario
    w : EnergyWeights or array_like
        Simplex weights, one per EH user.
    tol : float
        Ellipsoid tolerance relative to the unconstrained optimum.

    Returns
    -------
    EnergyRegionPoint
    """
    from .mumimo import reduce_zero_interference

    if sc.K_E < 1:
        raise ValueError("max_weighted_energy needs at least one EH user")
    ch.validate(sc)
    w = w if isinstance(w, EnergyWeights) else EnergyWeights(tuple(w))
    if len(w.w) != sc.K_E:
        raise ValueError(f"{len(w.w)} weights for {sc.K_E} EH users")
    wv = np.asarray(w.w)
    zero_set = [j for j in range(sc.K_P) if sc.I_th[j] == 0]
    ch_r, sc_r, U = reduce_zero_interference(ch, sc, zero_set)
    keep = [j for j in range(sc.K_P) if j not in zero_set]
    finite = [k for k, j in enumerate(keep) if np.isfinite(sc.I_th[j])]

    P = sc.P_T
    cG = _scaled(ch_r.G)
    Q = sum(wi * (G.conj().T @ G) for wi, G in zip(wv, ch_r.G)) / cG ** 2
    Ts = [ch_r.T[k] for k in finite]
    cT = _scaled(Ts)
    Ts = [T / cT for T in Ts]
    I = np.array([sc_r.I_th[k] / (cT ** 2 * P) for k in finite])
    TT = [T.conj().T @ T for T in Ts]
    scale = max(herm_eig(Q).phi[0], 1e-300)

    M = Q.shape[0]
    TTflat = np.array(TT).reshape(len(TT), M * M) if TT else None
    Tstack = np.vstack(Ts) if Ts else None
    starts = np.cumsum([0] + [T.shape[0] for T in Ts])[:-1]

    def pmat(mu):
        return Q - (mu @ TTflat).reshape(M, M) if TT else Q

    n_iter, status = 0, 'converged'
    if Ts:
        def oracle(mu):
            phi, V = np.linalg.eigh(pmat(mu))
            x = Tstack @ V[:, -1]
            g = np.add.reduceat(x.real ** 2 + x.imag ** 2, starts) - I
            return ellipsoid.OracleResponse.objective(-phi[-1] - mu @ I, g)

        z0 = np.zeros(len(Ts))
        z0[0] = 1.0
        # any maximizer has sum mu_j I_j <= delta_max(Q)
        r0 = 1.0 + 1.01 * scale / I.min()
        res = ellipsoid.maximize_with_restarts(
            oracle, z0, r0=r0, tol=tol * scale, max_iter=max_iter, nonneg=True)
        n_iter, status = res.iterations, res.status
        if not res.feasible:
            raise InfeasibleError("energy dual never reached a feasible point")
        mu = np.maximum(res.z, 0.0)
    else:
        mu = np.zeros(0)

    V, phi = herm_eig(pmat(mu))
    p = None
    act = mu > 1e-9 * scale / I if Ts else np.zeros(0, bool)
    for rtol in (CLUSTER_RTOL, 1e-5, 1e-4, 1e-3):
        cluster = phi >= phi[0] - rtol * scale
        if cluster.sum() == 1:
            v = V[:, 0]
            if all(np.sum(np.abs(T @ v) ** 2) <= I[k] * (1 + CR_RTOL)
                   for k, T in enumerate(Ts)):
                p = v
                break
            continue
        try:
            c = _restricted_beam(V[:, cluster], Ts, I, np.where(act, mu, 0.0))
        except DegenerateEigenspaceError:
            if rtol == 1e-3:
                raise
            continue
        p = V[:, cluster] @ c
        break
    if p is None:
        raise DegenerateEigenspaceError(
            "no top eigenvector satisfies the interference constraints")
    p = p / np.linalg.norm(p)
    f = U @ (np.sqrt(P) * p)
    energies = np.array([sc.rho * np.sum(np.abs(G @ f) ** 2) for G in ch.G])
    mu_full = np.zeros(sc.K_P)
    for k, m in zip(finite, mu):
        mu_full[keep[k]] = m * cG ** 2 / cT ** 2
    dual = (phi[0] + mu @ I) * cG ** 2 * P if Ts else phi[0] * cG ** 2 * P
    return EnergyRegionPoint(f=f, energies=energies, mu=mu_full, weights=w,
                             dual_value=float(dual), iterations=n_iter,
                             status=status)


def simplex_grid(K_E: int, grid: int = 21, max_points: int = 1000) -> list:
    """Uniform grid on the simplex with ``grid`` points per axis.

    For ``K_E >= 3`` the per-axis resolution shrinks until at most
    ``max_points`` points remain.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    if K_E == 1:
        return [EnergyWeights((1.0,))]
    steps = max(grid - 1, 1)

    def count(s):
        from math import comb
        return comb(s + K_E - 1, K_E - 1)

    while steps > 1 and count(steps) > max_points:
        steps -= 1
    pts = []
    for cuts in itertools.combinations(range(steps + K_E - 1), K_E - 1):
        parts = np.diff(np.concatenate(([-1], cuts, [steps + K_E - 1]))) - 1
        w = parts / steps
        w[-1] = 1.0 - w[:-1].sum()
        pts.append(EnergyWeights(tuple(w)))
    return pts


def energy_region(ch: ChannelSet, sc: NetworkScenario, grid: int = 21) -> list:
    """Boundary points for every weight of :func:`simplex_grid`."""
    return [max_weighted_energy(ch, sc, w) for w in simplex_grid(sc.K_E, grid)]


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    margin: float
    witness: EnergyRegionPoint | None

    def __iter__(self):
        return iter((self.feasible, self.margin, self.witness))


def check_feasibility(ch: ChannelSet, sc: NetworkScenario,
                      grid: int = 21) -> FeasibilityResult:
    """Grid test whether some boundary point meets every energy threshold.

    ``margin`` is the largest, over the grid, of ``min_i(energy_i - E_th_i)``
    in post-efficiency watts. A negative result is not a proof of
    infeasibility: the grid is finite.
    """
    if sc.K_E == 0 or not np.any(sc.E_th > 0):
        witness = max_weighted_energy(ch, sc, EnergyWeights.uniform(sc.K_E)) \
            if sc.K_E else None
        margin = float(np.min(witness.energies - sc.E_th)) if witness else np.inf
        return FeasibilityResult(True, margin, witness)
    best, best_pt = -np.inf, None
    for pt in energy_region(ch, sc, grid):
        m = float(np.min(pt.energies - sc.E_th))
        if m > best:
            best, best_pt = m, pt
    return FeasibilityResult(best >= 0, best, best_pt)
