"""Central-cut ellipsoid method for maximizing concave functions.

The oracle is queried at the ellipsoid center and answers in one of two
ways. For an *objective* step it returns the function value and a
supergradient, and the half-space in the ascent direction is kept. For a
*cut* step the center violates a constraint, and the oracle returns the
constraint's outward normal. The half-space pointing away from that normal
is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import SingularMatrixError

__all__ = ['OracleResponse', 'EllipsoidState', 'EllipsoidResult', 'maximize',
           'maximize_with_restarts', 'nonnegative']

#: Stop once the shape matrix is this small (relative to the first one).
TRACE_FLOOR = 1e-24


@dataclass
class OracleResponse:
    """Answer of an oracle at a query point.

    Parameters
    ----------
    kind : {'objective', 'cut'}
    g : np.ndarray
        Supergradient (objective) or outward normal of the violated
        constraint (cut).
    value : float
        Objective value, only meaningful when ``kind == 'objective'``.
    certified : bool
        The oracle has proven optimality of this point (e.g. a zero
        duality gap); the method stops and returns it.
    payload : object
        Opaque data attached to the point (e.g. the primal solution).
    """
    kind: str
    g: np.ndarray
    value: float = float('nan')
    certified: bool = False
    payload: Any = None

    @classmethod
    def objective(cls, value, g, certified=False, payload=None):
        return cls('objective', np.asarray(g, dtype=float), float(value),
                   certified, payload)

    @classmethod
    def cut(cls, g, payload=None):
        return cls('cut', np.asarray(g, dtype=float), payload=payload)


@dataclass
class EllipsoidState:
    """Center ``z`` and shape matrix ``A`` of {x : (x-z)^T A^-1 (x-z) <= 1}."""
    z: np.ndarray
    A: np.ndarray
    iteration: int = 0

    @classmethod
    def ball(cls, z0, r0: float) -> EllipsoidState:
        z0 = np.array(z0, dtype=float).reshape(-1)
        if z0.size < 1:
            raise ValueError("need at least one variable")
        if not r0 > 0:
            raise ValueError("r0 must be positive")
        return cls(z0, r0 ** 2 * np.eye(z0.size))

    @property
    def n(self) -> int:
        return self.z.size

    def step(self, direction: np.ndarray) -> float:
        """Keep the half-space ``{x : direction^T (x - z) >= 0}``.

        Returns ``sqrt(direction^T A direction)``, the width of the
        ellipsoid along the direction.
        """
        n = self.n
        Ag = self.A @ direction
        gAg = float(direction @ Ag)
        if not gAg > 0:
            raise SingularMatrixError("shape matrix is not positive definite")
        width = np.sqrt(gAg)
        if n == 1:
            self.z = self.z + 0.5 * Ag / width
            self.A = self.A / 4.0
        else:
            d = Ag / width
            self.z = self.z + d / (n + 1)
            self.A = (n * n / (n * n - 1.0)) * (self.A - (2.0 / (n + 1)) * np.outer(d, d))
            self.A = 0.5 * (self.A + self.A.T)
        self.iteration += 1
        return width

    def recondition(self) -> None:
        n = self.n
        self.A = self.A + 1e-12 * np.trace(self.A) / n * np.eye(n)


@dataclass
class EllipsoidResult:
    """Outcome of :func:`maximize`.

    ``z`` and ``value`` refer to the best objective point seen (None and
    ``-inf`` when none was found). ``trace`` is the running best value
    after each objective step, ``logdet`` the log-determinant of ``A``
    after every step.
    """
    z: np.ndarray | None
    value: float
    status: str
    iterations: int
    trace: list = field(default_factory=list)
    logdet: list = field(default_factory=list)
    payload: Any = None
    certified: bool = False
    width: float = float('inf')

    @property
    def feasible(self) -> bool:
        return self.z is not None


def nonnegative(oracle: Callable) -> Callable:
    """Wrap ``oracle`` so that points with a negative entry get a cut.

    The cut uses the normal ``-e_i`` of the most violated constraint
    ``-z_i <= 0``.
    """
    def wrapped(z):
        i = int(np.argmin(z))
        if z[i] < 0:
            g = np.zeros(z.size)
            g[i] = -1.0
            return OracleResponse.cut(g)
        return oracle(z)
    return wrapped


def maximize(oracle: Callable[[np.ndarray], OracleResponse], z0, r0: float = 1e3,
             tol: float = 1e-6, max_iter: int = 5000,
             nonneg: bool = False) -> EllipsoidResult:
    """Maximize a concave function over a convex set with the ellipsoid method.

    Parameters
    ----------
    oracle : callable
        ``oracle(z) -> OracleResponse``.
    z0 : array_like
        Center of the initial ball.
    r0 : float
        Radius of the initial ball; the optimum must lie inside it.
    tol : float
        Stop when ``sqrt(g^T A g) <= tol`` at an objective step, which
        bounds the possible improvement over the current point. When
        ``||g|| < 1`` the width along ``g/||g||`` must also be below ``tol``
        so that flat maxima are located to ``tol`` as well.
    max_iter : int
        Maximum number of oracle calls.
    nonneg : bool
        Restrict to ``z >= 0`` (see :func:`nonnegative`).

    Returns
    -------
    EllipsoidResult
        ``status`` is ``'converged'``, ``'max-iter'``, ``'stalled'`` (the
        shape matrix lost definiteness) or ``'infeasible'`` (no objective
        point was ever found).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if nonneg:
        oracle = nonnegative(oracle)
    st = EllipsoidState.ball(z0, r0)
    trace_floor = TRACE_FLOOR * np.trace(st.A)
    logdet_A = 2 * st.n * np.log(r0)
    res = EllipsoidResult(None, -np.inf, 'max-iter', 0, logdet=[logdet_A])
    reconditions = 0
    while st.iteration < max_iter:
        resp = oracle(st.z.copy())
        g = np.asarray(resp.g, dtype=float)
        if g.shape != st.z.shape or not np.all(np.isfinite(g)):
            raise ValueError("oracle returned a malformed vector")
        if resp.kind == 'objective':
            if resp.value > res.value or res.z is None:
                res.z, res.value, res.payload = st.z.copy(), resp.value, resp.payload
            res.trace.append(res.value)
            if resp.certified:
                res.z, res.value, res.payload = st.z.copy(), resp.value, resp.payload
                res.trace[-1] = max(res.trace[-1], resp.value)
                res.status, res.certified = 'converged', True
                break
            direction = g
        elif resp.kind == 'cut':
            direction = -g
        else:
            raise ValueError(f"unknown oracle response {resp.kind!r}")
        if not np.any(direction):
            if resp.kind == 'objective':
                # zero supergradient: the center is a maximizer
                res.z, res.value, res.payload = st.z.copy(), resp.value, resp.payload
                res.status, res.width = 'converged', 0.0
                break
            raise ValueError("cut with a zero normal")
        try:
            width = st.step(direction)
        except SingularMatrixError:
            reconditions += 1
            if reconditions > 3:
                # the ellipsoid has collapsed numerically; keep the best point
                res.status = 'stalled'
                break
            st.recondition()
            continue
        n = st.n
        if n == 1:
            logdet_A += np.log(0.25)
        else:
            logdet_A += n * np.log(n * n / (n * n - 1.0)) + np.log((n - 1.0) / (n + 1.0))
        res.logdet.append(logdet_A)
        if resp.kind == 'objective':
            res.width = width
            if width <= tol * min(1.0, float(np.linalg.norm(g))):
                res.status = 'converged'
                break
        if np.trace(st.A) <= trace_floor:
            res.status = 'converged'
            break
    res.iterations = st.iteration + (1 if res.status == 'converged' else 0)
    if res.z is None:
        res.status = 'infeasible'
    return res


def maximize_with_restarts(oracle, z0, r0: float = 1e3, tol: float = 1e-6,
                           max_iter: int = 5000, nonneg: bool = False,
                           max_restarts: int = 6) -> EllipsoidResult:
    """:func:`maximize`, restarted when the optimum sits near the initial boundary.

    If the returned point is at distance ``>= 0.9 r0`` from the start (or
    no objective point was found) the search restarts centered at the best
    point with twice the radius. Iteration counts accumulate.
    """
    z0 = np.asarray(z0, dtype=float)
    total = 0
    for _ in range(max_restarts + 1):
        res = maximize(oracle, z0, r0, tol, max_iter, nonneg)
        total += res.iterations
        if res.feasible and (res.certified
                             or np.linalg.norm(res.z - z0) < 0.9 * r0):
            break
        if res.feasible:
            z0 = res.z
        r0 *= 2.0
    res.iterations = total
    return res
