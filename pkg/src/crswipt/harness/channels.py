"""Reproducible Rayleigh channel draws."""

import numpy as np

from ..core import ChannelSet, NetworkScenario

#: Path-loss amplitude for exponent 3 at 10 m.
PATHLOSS_AMPLITUDE = 10 ** -1.5

_GROUPS = {'H': 0, 'G': 1, 'T': 2}


def _draw(seed: int, group: str, index: int, shape) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed) % 2 ** 64,
                                spawn_key=(_GROUPS[group], index))
    rng = np.random.default_rng(ss)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return PATHLOSS_AMPLITUDE * z


def generate_channels(sc: NetworkScenario, seed: int) -> ChannelSet:
    """Draw ``H_k``, ``G_i`` and ``T_j`` with i.i.d. ``10^-3/2 CN(0, 1)`` entries.

    Every matrix has its own random stream keyed by (group, user index), so
    adding users never changes the draws of existing ones.
    """
    M = sc.M
    H = [_draw(seed, 'H', k, (sc.N_I, M)) for k in range(sc.K_I)]
    G = [_draw(seed, 'G', i, (sc.N_E, M)) for i in range(sc.K_E)]
    T = [_draw(seed, 'T', j, (sc.N_P, M)) for j in range(sc.K_P)]
    return ChannelSet(H=H, G=G, T=T)
