"""Shared builders and independent reference oracles for the test-suite.

The oracles here deliberately avoid the package's solvers: waterfilling by
bisection on the water level, brute-force beam grids and plain loops.
"""

import numpy as np
import pytest
from hypothesis import settings

from crswipt.core import ChannelSet, NetworkScenario

# reproducible example generation across runs
settings.register_profile('repro', derandomize=True, deadline=None)
settings.load_profile('repro')


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(sc: NetworkScenario, rng, scale=1.0) -> ChannelSet:
    return ChannelSet(H=[scale * crandn(rng, sc.N_I, sc.M) for _ in range(sc.K_I)],
                      G=[scale * crandn(rng, sc.N_E, sc.M) for _ in range(sc.K_E)],
                      T=[scale * crandn(rng, sc.N_P, sc.M) for _ in range(sc.K_P)])


def waterfilling_rate_bits(H, P, sigma2):
    """Capacity of ``y = H x + n`` under ``E||x||^2 <= P`` (bits).

    Eigenvalues of ``H^H H / sigma2`` are loaded with ``(mu - 1/lam)_+``; the
    water level ``mu`` is found by bisection.
    """
    lam = np.linalg.eigvalsh(H.conj().T @ H / sigma2)
    lam = lam[lam > 1e-300]
    lo, hi = 0.0, P + float(np.max(1.0 / lam))
    for _ in range(400):
        mu = 0.5 * (lo + hi)
        if np.sum(np.maximum(mu - 1.0 / lam, 0.0)) > P:
            hi = mu
        else:
            lo = mu
    p = np.maximum(lo - 1.0 / lam, 0.0)
    return float(np.sum(np.log2(1.0 + lam * p)))


def unit_beams_2d(n_theta=100, n_phi=100):
    """``n_theta * n_phi`` unit vectors in C^2 covering directions up to phase."""
    th = (np.arange(n_theta) + 0.5) / n_theta * (np.pi / 2)
    ph = np.arange(n_phi) / n_phi * 2 * np.pi
    T, Ph = np.meshgrid(th, ph, indexing='ij')
    return np.stack([np.cos(T).ravel(), (np.sin(T) * np.exp(1j * Ph)).ravel()], axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get('test_acceptance')
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section('acceptance criteria')
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
