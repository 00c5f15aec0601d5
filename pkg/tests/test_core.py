import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crswipt import core
from crswipt.core import (ChannelSet, NetworkScenario, Precoder, ScaledProblem,
                          Utility, constraint_residuals, harvested_power,
                          interference_power, rate_per_user, sum_utility)
from crswipt.errors import DimensionError

from conftest import crandn, random_channels


def scalar_case(K_I=1):
    sc = NetworkScenario(M=1, K_I=K_I, N_I=1, P_T=1.0, sigma_n2=1.0)
    ch = ChannelSet(H=[np.ones((1, 1))] * K_I, G=[], T=[])
    return sc, ch


class TestScenario:
    def test_defaults_and_readonly(self):
        sc = NetworkScenario(M=2, K_I=2, N_I=1, P_T=1.0, sigma_n2=0.1,
                             K_E=1, E_th=[1e-3], rho=0.5)
        assert np.array_equal(sc.alpha, [1.0, 1.0])
        assert sc.E_eff[0] == pytest.approx(2e-3)
        with pytest.raises(ValueError):
            sc.E_th[0] = 1.0

    @pytest.mark.parametrize('bad', [dict(P_T=0.0), dict(sigma_n2=-1.0), dict(rho=0.0),
                                     dict(rho=1.5), dict(M=0)])
    def test_invalid(self, bad):
        kw = dict(M=2, K_I=1, N_I=1, P_T=1.0, sigma_n2=1.0)
        kw.update(bad)
        with pytest.raises(ValueError):
            NetworkScenario(**kw)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            NetworkScenario(M=2, K_I=1, N_I=1, P_T=1.0, sigma_n2=1.0, K_E=2, E_th=[1.0])

    def test_channel_validation(self, rng):
        sc = NetworkScenario(M=3, K_I=2, N_I=2, P_T=1.0, sigma_n2=1.0)
        ch = ChannelSet(H=[crandn(rng, 2, 3)], G=[], T=[])
        with pytest.raises(DimensionError):
            ch.validate(sc)
        ch = ChannelSet(H=[crandn(rng, 2, 3), np.full((2, 3), np.nan)], G=[], T=[])
        with pytest.raises(ValueError):
            ch.validate(sc)

    def test_precoder_blocks(self, rng):
        F = crandn(rng, 4, 6)
        p = Precoder(F, 2)
        assert p.K_I == 3
        assert np.array_equal(p.block(1), F[:, 2:4])
        assert p.power == pytest.approx(np.sum(np.abs(F) ** 2))


class TestRate:
    def test_scalar(self):
        sc, ch = scalar_case()
        assert rate_per_user(np.ones((1, 1)), ch, sc)[0] == pytest.approx(1.0)

    def test_zero_precoder(self, rng):
        sc = NetworkScenario(M=3, K_I=2, N_I=2, P_T=1.0, sigma_n2=1.0)
        ch = random_channels(sc, rng)
        assert np.all(rate_per_user(np.zeros((3, 4)), ch, sc) == 0)

    def test_two_scalar_users(self):
        sc, ch = scalar_case(K_I=2)
        r = rate_per_user(np.ones((1, 2)), ch, sc)
        assert r[0] == pytest.approx(np.log2(1.5), abs=1e-12)
        assert r[0] == pytest.approx(0.585, abs=1e-3)

    def test_matches_explicit_formula(self, rng):
        sc = NetworkScenario(M=4, K_I=2, N_I=2, P_T=1.0, sigma_n2=0.3)
        ch = random_channels(sc, rng)
        F = crandn(rng, 4, 4)
        H1, F1, F2 = ch.H[1], F[:, :2], F[:, 2:]
        Rn = H1 @ F1 @ F1.conj().T @ H1.conj().T + 0.3 * np.eye(2)
        S = H1 @ F2
        ref = np.log2(np.linalg.det(np.eye(2) + S.conj().T @ np.linalg.inv(Rn) @ S).real)
        assert rate_per_user(F, ch, sc)[1] == pytest.approx(ref, rel=1e-12)

    def test_shape_error(self, rng):
        sc, ch = scalar_case()
        with pytest.raises(DimensionError):
            rate_per_user(np.ones((2, 1)), ch, sc)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        sc = NetworkScenario(M=3, K_I=2, N_I=2, P_T=1.0, sigma_n2=0.5)
        ch = random_channels(sc, rng)
        F = crandn(rng, 3, 4)
        Q1, _ = np.linalg.qr(crandn(rng, 2, 2))
        Q2, _ = np.linalg.qr(crandn(rng, 2, 2))
        G = np.hstack([F[:, :2] @ Q1, F[:, 2:] @ Q2])
        np.testing.assert_allclose(rate_per_user(G, ch, sc), rate_per_user(F, ch, sc),
                                   rtol=1e-9, atol=1e-12)


class TestPowers:
    def test_identity_channel(self):
        sc = NetworkScenario(M=2, K_I=1, N_I=1, P_T=1.0, sigma_n2=1.0, K_E=1,
                             N_E=2, E_th=[0.0], rho=0.5)
        ch = ChannelSet(H=[np.ones((1, 2))], G=[np.eye(2)], T=[])
        F = np.array([[0.06], [0.08]])  # trace(F^H F) = 0.01
        assert harvested_power(F, ch, sc)[0] == pytest.approx(0.005)
        assert harvested_power(np.zeros((2, 1)), ch, sc)[0] == 0

    def test_elementwise_sums(self, rng):
        sc = NetworkScenario(M=2, K_I=1, N_I=2, P_T=1.0, sigma_n2=1.0, K_E=1, N_E=2,
                             E_th=[0.0], K_P=1, N_P=2, I_th=[1.0], rho=0.7)
        ch = random_channels(sc, rng)
        F = crandn(rng, 2, 2)
        GF, TF = ch.G[0] @ F, ch.T[0] @ F
        e = sum(abs(GF[a, b]) ** 2 for a in range(2) for b in range(2))
        i = sum(abs(TF[a, b]) ** 2 for a in range(2) for b in range(2))
        assert harvested_power(F, ch, sc)[0] == pytest.approx(0.7 * e, rel=1e-13)
        assert interference_power(F, ch)[0] == pytest.approx(i, rel=1e-13)

    def test_orthogonal_beam(self):
        ch = ChannelSet(H=[np.ones((1, 2))], G=[], T=[np.array([[1.0, 0.0]])])
        for f in (0.3, 2.0, 1j):
            assert interference_power(np.array([[0.0], [f]]), ch)[0] == 0

    def test_identity_interference(self):
        ch = ChannelSet(H=[np.ones((1, 2))], G=[], T=[np.eye(2)])
        F = np.array([[0.3], [0.4j]])
        assert interference_power(F, ch)[0] == pytest.approx(0.25)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), c=st.floats(0.01, 1.0))
    def test_quadratic_scaling(self, seed, c):
        rng = np.random.default_rng(seed)
        sc = NetworkScenario(M=3, K_I=1, N_I=2, P_T=1.0, sigma_n2=1.0, K_E=2, N_E=2,
                             E_th=[0.0, 0.0], K_P=1, N_P=1, I_th=[1.0], rho=0.5)
        ch = random_channels(sc, rng)
        F = crandn(rng, 3, 2)
        np.testing.assert_allclose(harvested_power(c * F, ch, sc),
                                   c ** 2 * harvested_power(F, ch, sc), rtol=1e-12)
        ip, ip_c = interference_power(F, ch), interference_power(c * F, ch)
        np.testing.assert_allclose(ip_c, c ** 2 * ip, rtol=1e-12)
        assert np.all(ip_c <= ip * (1 + 1e-15))

    def test_residual_signs(self):
        sc = NetworkScenario(M=1, K_I=1, N_I=1, P_T=2.0, sigma_n2=1.0, K_E=1,
                             E_th=[0.5], K_P=1, I_th=[0.1], rho=1.0)
        ch = ChannelSet(H=[np.ones((1, 1))], G=[np.ones((1, 1))], T=[np.ones((1, 1))])
        r = constraint_residuals(np.ones((1, 1)), ch, sc)
        assert r == pytest.approx({'power': 1.0, 'eh_0': 0.5, 'cr_0': -0.9})


class TestUtility:
    def test_examples(self):
        assert sum_utility([1, 2], Utility.wsr((1, 1))) == 3
        assert sum_utility([1, 1], Utility('PF')) == 0
        assert sum_utility([2, 4], Utility('HMR')) == pytest.approx(-0.75)

    def test_zero_rate_domain_error(self):
        with pytest.raises(ValueError):
            sum_utility([0.0, 1.0], Utility('PF'))
        with pytest.raises(ValueError):
            sum_utility([0.0, 1.0], Utility('HMR'))
        assert sum_utility([0.0, 1.0], Utility('WSR')) == 1.0

    def test_kind_checks(self):
        assert Utility('pf').kind == 'PF'
        with pytest.raises(ValueError):
            Utility('MAXMIN')
        with pytest.raises(ValueError):
            Utility('PF', alpha=(1.0,))

    def test_weights_fallback(self):
        sc = NetworkScenario(M=2, K_I=2, N_I=1, P_T=1.0, sigma_n2=1.0, alpha=[2.0, 0.5])
        assert np.array_equal(Utility().weights(2, sc), [2.0, 0.5])
        assert np.array_equal(Utility.wsr((3, 1)).weights(2, sc), [3.0, 1.0])
        with pytest.raises(DimensionError):
            Utility.wsr((1, 1, 1)).weights(2)


class TestScaledProblem:
    def test_exact_change_of_variables(self, rng):
        sc = NetworkScenario(M=3, K_I=2, N_I=1, P_T=0.01, sigma_n2=1e-6, K_E=1,
                             N_E=2, E_th=[1e-6], K_P=2, N_P=1, I_th=[1e-7, np.inf],
                             rho=0.5)
        ch = random_channels(sc, rng, scale=0.03)
        prob = ScaledProblem.build(ch, sc)
        assert prob.P == 1.0
        assert prob.cr_index == (0,) and prob.eh_index == (0,)
        Fp = crandn(rng, 3, 2)
        F = prob.power_scale * Fp
        # harvested energy and interference map onto the normalized thresholds
        e = np.sum(np.abs(ch.G[0] @ F) ** 2) / (sc.E_th[0] / sc.rho)
        e_p = np.sum(np.abs(prob.G[0] @ Fp) ** 2) / prob.E[0]
        assert e == pytest.approx(e_p, rel=1e-12)
        i = np.sum(np.abs(ch.T[0] @ F) ** 2) / sc.I_th[0]
        i_p = np.sum(np.abs(prob.T[0] @ Fp) ** 2) / prob.I[0]
        assert i == pytest.approx(i_p, rel=1e-12)
        snr = core.rates_nats(F, ch.H, sc.sigma_n2, 1)
        snr_p = core.rates_nats(Fp, prob.H, prob.sigma2, 1)
        np.testing.assert_allclose(snr, snr_p, rtol=1e-12)

    def test_vacuous_constraints_dropped(self, rng):
        sc = NetworkScenario(M=2, K_I=1, N_I=1, P_T=1.0, sigma_n2=1.0, K_E=2,
                             E_th=[0.0, 1.0], K_P=1, I_th=[np.inf])
        prob = ScaledProblem.build(random_channels(sc, rng), sc)
        assert prob.eh_index == (1,) and prob.cr_index == ()
