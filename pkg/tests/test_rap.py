import inspect
import math

import numpy as np
import pytest
from scipy import special, stats
from sklearn.base import clone

from specshare.channels import FadingSpec, ScenarioSpec, sample_gain, sample_state
from specshare.exceptions import DomainError
from specshare.numerics import RngStream
from specshare.rap import (
    BasisChannelSet,
    RandomAerialPrecoder,
    TxWeights,
    equivalent_gain,
    equivalent_los,
    frozen_phase_profiles,
    kolmogorov_sf,
    ks_rayleigh,
    mrc_receive_weights,
    random_tx_weights,
    rap_link_step,
    sample_basis_channels,
)

K10 = 10.0


def rap_amplitudes(m, k, seed, n, profile_seed=0):
    root = RngStream(seed)
    profile = frozen_phase_profiles(m, 1, RngStream(profile_seed, 99)).sp
    w = random_tx_weights(m, root.child(0), n)
    return np.abs(equivalent_gain(w, sample_basis_channels(m, FadingSpec.rician(k), profile, root.child(1), n)))


class TestTxWeights:
    def test_single_pattern(self):
        w = random_tx_weights(1, RngStream(1))
        assert w.m == 1 and abs(w.weights[0]) == pytest.approx(1.0)

    def test_phases_uniform(self):
        w = random_tx_weights(4, RngStream(2), 100_000)
        theta = w.phases[:, 0]
        assert theta.mean() == pytest.approx(math.pi, abs=0.02)
        assert stats.kstest(theta / (2 * math.pi), "uniform").pvalue > 0.01

    @pytest.mark.parametrize("m", range(1, 9))
    def test_unit_energy(self, m):
        w = random_tx_weights(m, RngStream(m), 100).weights
        assert np.allclose(np.sum(np.abs(w) ** 2, axis=-1), 1.0, atol=1e-14)

    def test_needs_a_pattern(self):
        with pytest.raises(DomainError):
            random_tx_weights(0, RngStream(1))


class TestBasisChannels:
    def test_deterministic(self):
        phi = np.array([0.1, 2.0, 4.0])
        ch = sample_basis_channels(3, FadingSpec.awgn(2.0), phi, RngStream(1))
        assert np.allclose(ch.gains, math.sqrt(2.0) * np.exp(1j * phi), rtol=0, atol=1e-15)

    def test_rayleigh_patterns_uncorrelated(self):
        ch = sample_basis_channels(4, FadingSpec.rayleigh(), np.zeros(4), RngStream(3), 100_000)
        h = ch.gains
        for a in range(4):
            for b in range(a + 1, 4):
                assert abs(np.mean(h[:, a] * np.conj(h[:, b]))) < 0.01

    def test_mean_power(self):
        profile = frozen_phase_profiles(5, 1, RngStream(4)).sp
        ch = sample_basis_channels(5, FadingSpec.rician(K10), profile, RngStream(5), 100_000)
        assert np.allclose(np.mean(np.abs(ch.gains) ** 2, axis=0), 1.0, rtol=0.01)

    def test_profile_length_checked(self):
        with pytest.raises(DomainError):
            sample_basis_channels(3, FadingSpec.rayleigh(), np.zeros(2), RngStream(1))


class TestEquivalentGain:
    def test_single_pattern(self):
        ch = sample_basis_channels(1, FadingSpec.rician(3.0), [0.5], RngStream(1), 10)
        assert np.allclose(equivalent_gain(TxWeights(np.zeros((10, 1))), ch), ch.gains[:, 0])

    def test_coherent_sum(self):
        c = 0.3 - 0.4j
        ch = BasisChannelSet(np.array([c, c]), 0.0, 1.0, np.zeros(2))
        assert equivalent_gain(TxWeights(np.zeros(2)), ch) == pytest.approx(math.sqrt(2) * c)

    def test_mismatch(self):
        ch = BasisChannelSet(np.ones(3), 0.0, 1.0, np.zeros(3))
        with pytest.raises(DomainError):
            equivalent_gain(TxWeights(np.zeros(2)), ch)

    def test_m5_mean_power(self):
        a = rap_amplitudes(5, K10, 6, 100_000)
        assert np.mean(a**2) == pytest.approx(1.0, rel=0.02)

    @pytest.mark.xfail(
        strict=True,
        reason="five random phasors are still measurably non-Gaussian; KS resolves it at n=1e5",
    )
    def test_m5_passes_rayleigh_ks(self):
        assert ks_rayleigh(rap_amplitudes(5, K10, 7, 100_000))[1] > 0.01

    @pytest.mark.parametrize("m", range(1, 9))
    def test_energy_conserved(self, m):
        p = rap_amplitudes(m, K10, 10 + m, 100_000) ** 2
        assert abs(p.mean() - 1.0) <= 3 * p.std() / math.sqrt(p.size)


class TestEquivalentLos:
    def test_no_specular_without_k(self):
        ch = sample_basis_channels(4, FadingSpec.rayleigh(), np.ones(4), RngStream(1), 5)
        assert np.all(equivalent_los(random_tx_weights(4, RngStream(2), 5), ch) == 0)

    def test_clt_variance(self):
        ch = sample_basis_channels(8, FadingSpec.rician(10.0), frozen_phase_profiles(8, 1, RngStream(1)).sp, RngStream(2))
        l = equivalent_los(random_tx_weights(8, RngStream(3), 100_000), ch)
        assert np.var(l.real) == pytest.approx(10 / 22, rel=0.05)
        assert np.var(l.imag) == pytest.approx(10 / 22, rel=0.05)
        assert abs(l.real.mean()) < 0.01

    def test_single_pattern_is_rotated_phasor(self):
        ch = sample_basis_channels(1, FadingSpec.rician(K10), [1.3], RngStream(4))
        l = equivalent_los(random_tx_weights(1, RngStream(5), 100_000), ch)
        assert np.allclose(np.abs(l), math.sqrt(K10 / (K10 + 1)))
        phase = np.mod(np.angle(l), 2 * math.pi) / (2 * math.pi)
        assert stats.kstest(phase, "uniform").pvalue > 0.01


class TestMrc:
    def test_single_pattern(self):
        c = 0.6 + 0.8j
        w = mrc_receive_weights([c])
        assert abs(w[0]) == pytest.approx(1.0) and w[0] == pytest.approx(np.conj(c) / abs(c))

    def test_unit_norm_and_real_combination(self):
        gen = np.random.default_rng(0)
        l = gen.standard_normal((200, 6)) + 1j * gen.standard_normal((200, 6))
        w = mrc_receive_weights(l)
        assert np.allclose(np.linalg.norm(w, axis=-1), 1.0, atol=1e-12)
        combined = np.sum(w * l, axis=-1)
        assert np.allclose(combined.imag, 0.0, atol=1e-12)
        assert np.allclose(combined.real, np.linalg.norm(l, axis=-1))

    def test_zero_vector(self):
        with pytest.raises(DomainError):
            mrc_receive_weights(np.zeros(3))

    def test_needs_only_specular_terms(self):
        assert list(inspect.signature(mrc_receive_weights).parameters) == ["specular"]


class TestLinkStep:
    def test_single_pattern_reduces_to_single_antenna(self):
        sc = ScenarioSpec.named("rician-rician", K10)
        profiles = frozen_phase_profiles(1, 1, RngStream(1))
        rap = rap_link_step(sc, 1, 1, False, profiles, RngStream(2), 50_000).state()
        direct = sample_state(sc, RngStream(3), 50_000)
        for a, b in zip(rap.as_array().T, direct.as_array().T):
            assert stats.ks_2samp(a, b).pvalue > 0.01

    @pytest.mark.xfail(
        strict=True,
        reason="at M=5 the interference amplitudes deviate from Rayleigh by more than KS resolves at 1e5",
    )
    def test_rician_rician_all_links_exponential(self):
        sc = ScenarioSpec.named("rician-rician", K10)
        profiles = frozen_phase_profiles(5, 5, RngStream(4))
        link = rap_link_step(sc, 5, 5, False, profiles, RngStream(5), 100_000)
        for h in (link.h_s, link.h_sp, link.h_ps):
            assert ks_rayleigh(np.abs(h))[1] > 0.01

    def test_smart_specular_concentrates(self):
        # ||l_s|| / sqrt(m_rx) settles towards a constant as receive patterns are added
        sc = ScenarioSpec.named("rician-rician", K10)
        spreads = []
        for m_rx in (1, 2, 4, 8):
            profiles = frozen_phase_profiles(8, m_rx, RngStream(6))
            link = rap_link_step(sc, 8, m_rx, True, profiles, RngStream(7), 50_000)
            assert np.allclose(link.specular_s.imag, 0.0, atol=1e-12)
            spreads.append(np.var(link.specular_s.real / math.sqrt(m_rx)))
        assert all(b < a for a, b in zip(spreads, spreads[1:]))

    def test_smart_interference_stays_randomised(self):
        sc = ScenarioSpec.named("rician-rician", K10)
        profiles = frozen_phase_profiles(8, 8, RngStream(8))
        smart = rap_link_step(sc, 8, 8, True, profiles, RngStream(9), 50_000)
        dumb = rap_link_step(sc, 8, 8, False, profiles, RngStream(9), 50_000)
        assert np.array_equal(smart.h_ps, dumb.h_ps)
        assert np.array_equal(smart.h_sp, dumb.h_sp)
        assert np.mean(np.abs(smart.h_ps) ** 2) == pytest.approx(1.0, rel=0.02)

    def test_smart_rejected_on_rayleigh_su_link(self):
        sc = ScenarioSpec.named("rician-rayleigh")
        with pytest.raises(DomainError):
            rap_link_step(sc, 2, 2, True, frozen_phase_profiles(2, 2, RngStream(1)), RngStream(2), 10)

    def test_pattern_counts_checked(self):
        sc = ScenarioSpec.named("rayleigh-rayleigh")
        with pytest.raises(DomainError):
            rap_link_step(sc, 0, 1, False, frozen_phase_profiles(1, 1, RngStream(1)), RngStream(2), 10)


class TestKs:
    def test_statistic_matches_scipy(self):
        a = np.abs(sample_gain(FadingSpec.rician(1.0), RngStream(1), 5000))
        d, p = ks_rayleigh(a, 1.0)
        ref = stats.kstest(a, lambda x: -np.expm1(-(x**2)))
        assert d == pytest.approx(ref.statistic, rel=1e-12)
        assert p == pytest.approx(special.kolmogorov(math.sqrt(a.size) * d), rel=1e-6, abs=1e-12)

    @pytest.mark.parametrize("x", [0.05, 0.3, 0.8, 0.999, 1.0, 1.36, 1.63, 2.5, 5.0])
    def test_kolmogorov_sf(self, x):
        assert kolmogorov_sf(x) == pytest.approx(special.kolmogorov(x), rel=1e-9, abs=1e-15)

    def test_calibrated_under_null(self):
        root = RngStream(2)
        p = [ks_rayleigh(np.abs(sample_gain(FadingSpec.rayleigh(), root.child(i), 2000)))[1] for i in range(200)]
        assert np.mean(np.array(p) < 0.05) == pytest.approx(0.05, abs=0.04)

    def test_rejects_rician_without_rap(self):
        a = np.abs(sample_gain(FadingSpec.rician(K10), RngStream(3), 10_000))
        assert ks_rayleigh(a)[1] < 1e-6

    def test_sample_floor(self):
        with pytest.raises(DomainError):
            ks_rayleigh(np.ones(99))

    @pytest.mark.xfail(strict=True, reason="at M=5 the KS distance to Rayleigh is about 0.02, above the 1% level for n=1e4")
    def test_rap_m5_passes_at_1e4(self):
        assert ks_rayleigh(rap_amplitudes(5, K10, 4, 10_000))[1] > 0.01


class TestRayleighisation:
    def test_ks_non_increasing_in_m(self):
        ms = (1, 2, 3, 5, 8)
        mean_d = [np.mean([ks_rayleigh(rap_amplitudes(m, K10, 100 + t, 10_000))[0] for t in range(50)]) for m in ms]
        assert all(b <= a for a, b in zip(mean_d, mean_d[1:]))
        # most of the remaining distance is gone by M=5
        assert mean_d[3] < 0.2 * mean_d[0]

    def test_rayleigh_channel_unaltered(self):
        after = rap_amplitudes(5, 0.0, 5, 50_000)
        before = np.abs(sample_gain(FadingSpec.rayleigh(), RngStream(6), 50_000))
        assert stats.ks_2samp(after, before).pvalue > 0.01

    def test_more_deep_fades_after(self):
        before = np.abs(sample_gain(FadingSpec.rician(K10), RngStream(7), 100_000))
        after = rap_amplitudes(5, K10, 8, 100_000)
        assert np.mean(after < 0.1) > np.mean(before < 0.1)

    def test_independent_of_phase_profile(self):
        samples = [rap_amplitudes(5, K10, 9, 20_000, profile_seed=s) for s in range(5)]
        for other in samples[1:]:
            assert stats.ks_2samp(samples[0], other).pvalue > 0.001


class TestPrecoderEstimator:
    def test_transform_matches_function(self):
        ch = sample_basis_channels(4, FadingSpec.rician(K10), np.zeros(4), RngStream(1), 1000)
        est = RandomAerialPrecoder(seed=3, stream_id=2).fit(ch.gains)
        out = est.transform(ch.gains)
        expected = equivalent_gain(random_tx_weights(4, RngStream(3, 2), 1000), ch)
        assert np.array_equal(out, expected)
        assert np.array_equal(est.transform(ch.gains), out)

    def test_clone(self):
        est = RandomAerialPrecoder(seed=5)
        assert clone(est).get_params() == {"seed": 5, "stream_id": 0}

    def test_validation(self):
        est = RandomAerialPrecoder().fit(np.ones((3, 2)))
        with pytest.raises(ValueError):
            est.transform(np.ones((3, 3)))
        with pytest.raises(ValueError):
            RandomAerialPrecoder().fit(np.ones(3))
        with pytest.raises(ValueError):
            RandomAerialPrecoder().fit(np.array([[np.inf, 1.0]]))
