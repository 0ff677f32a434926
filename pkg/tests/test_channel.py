import math

import numpy as np
import pytest

from svdmimo import (
    ConfigError,
    NoiseSpec,
    PilotBlock,
    ShapeError,
    derive_rng,
    sample_rayleigh,
    send_pilots,
    transmit,
)


class TestSampling:
    def test_determinism(self):
        a = sample_rayleigh(4, 4, 1, "unit", rng=7)
        b = sample_rayleigh(4, 4, 1, "unit", rng=7)
        assert np.array_equal(a.h, b.h)

    def test_multi_user_shape(self):
        ch = sample_rayleigh(16, 4, 4, "unit", rng=1)
        assert ch.h.shape == (16, 16)
        assert ch.user_channel(2).shape == (4, 16)

    @pytest.mark.parametrize(
        "convention,expected", [("unit", 1.0), ("per_entry_half", 0.5), ("over_n", 0.25)]
    )
    def test_entry_variance_law_of_large_numbers(self, convention, expected):
        rng = np.random.default_rng(11)
        total, count = 0.0, 0
        for _ in range(400):
            ch = sample_rayleigh(4, 4, 1, convention, rng=rng)
            total += float(np.sum(np.abs(ch.h) ** 2))
            count += ch.h.size
        mean = total / count  # 6400 draws of 16 entries each
        assert abs(mean - expected) / expected <= 0.01
        assert sample_rayleigh(4, 4, 1, convention, rng=0).entry_variance == expected

    def test_mu_dimension_constraints(self):
        with pytest.raises(ConfigError):
            sample_rayleigh(5, 2, 2, "unit", rng=0)  # N not multiple of K
        with pytest.raises(ConfigError):
            sample_rayleigh(16, 2, 4, "unit", rng=0)  # K*M < N
        with pytest.raises(ConfigError):
            sample_rayleigh(4, 4, 2, "unit", rng=0)  # N must exceed M

    def test_bad_convention(self):
        with pytest.raises(ConfigError):
            sample_rayleigh(2, 2, 1, "bogus", rng=0)


class TestTransmit:
    def test_noiseless_identity_channel(self):
        ch = np.eye(3)
        x = np.arange(6, dtype=float).reshape(3, 2) + 0j
        assert np.array_equal(transmit(ch, x), x)

    def test_zero_signal_noise_moment(self):
        rng = np.random.default_rng(12)
        h = np.eye(2)
        x = np.zeros((2, 50000))
        noise = NoiseSpec(snr_db=3.0, signal_power=1.0)
        y = transmit(h, x, noise, rng)
        var = noise.variance()
        measured = float(np.mean(np.abs(y) ** 2))
        assert abs(measured - var) / var <= 0.02

    def test_seeded_repeatability(self):
        ch = sample_rayleigh(4, 4, 1, "unit", rng=5)
        x = np.ones((4, 8), dtype=complex)
        noise = NoiseSpec(snr_db=0.0)
        y1 = transmit(ch, x, noise, rng=derive_rng(99, 1, 0))
        y2 = transmit(ch, x, noise, rng=derive_rng(99, 1, 0))
        assert np.array_equal(y1, y2)

    def test_noiseless_linearity(self):
        rng = np.random.default_rng(13)
        ch = sample_rayleigh(4, 3, 1, "unit", rng=rng)
        x1 = rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))
        x2 = rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))
        a, b = 2.0 - 1j, 0.5 + 3j
        lhs = transmit(ch, a * x1 + b * x2)
        rhs = a * transmit(ch, x1) + b * transmit(ch, x2)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_shape_mismatch(self):
        ch = sample_rayleigh(4, 4, 1, "unit", rng=0)
        with pytest.raises(ShapeError):
            transmit(ch, np.ones((3, 2), dtype=complex))

    def test_infinite_snr_is_noiseless(self):
        ch = sample_rayleigh(2, 2, 1, "unit", rng=3)
        x = np.ones((2, 4), dtype=complex)
        y = transmit(ch, x, NoiseSpec(snr_db=math.inf), rng=derive_rng(0, 0))
        assert np.array_equal(y, ch.h @ x)


class TestPilots:
    def test_orthogonal_unit_power(self):
        p = PilotBlock.orthogonal(4)
        assert np.allclose(np.abs(p.x_p), 1.0)
        assert np.allclose(p.x_p @ p.x_p.conj().T, 4 * np.eye(4), atol=1e-12)

    def test_noiseless_identifiability(self):
        ch = sample_rayleigh(4, 3, 1, "unit", rng=8)
        p = PilotBlock.orthogonal(4, 8)
        y_p = send_pilots(ch, p)
        gram = p.x_p @ p.x_p.conj().T
        h_rec = y_p @ p.x_p.conj().T @ np.linalg.inv(gram)
        assert np.max(np.abs(h_rec - ch.h)) <= 1e-10

    def test_short_pilots_rejected(self):
        with pytest.raises(ConfigError):
            PilotBlock.orthogonal(4, 3)
        with pytest.raises(ConfigError):
            PilotBlock(x_p=np.ones((4, 2)))

    def test_rank_deficient_pilots_rejected(self):
        x = np.ones((3, 4), dtype=complex)  # rank one
        with pytest.raises(ConfigError):
            PilotBlock(x_p=x)

    def test_pilot_noise_moment(self):
        # residual power after removing H X_p should match the noise variance
        noise = NoiseSpec(snr_db=20.0, signal_power=1.0)
        var = noise.variance()
        p = PilotBlock.orthogonal(4)
        acc = 0.0
        trials = 1000
        for t in range(trials):
            ch = sample_rayleigh(4, 4, 1, "unit", rng=derive_rng(21, 0, t))
            y_p = send_pilots(ch, p, noise, rng=derive_rng(21, 2, t))
            acc += float(np.sum(np.abs(y_p - ch.h @ p.x_p) ** 2)) / (4 * p.length)
        assert abs(acc / trials - var) / var <= 0.05


class TestRngDiscipline:
    def test_streams_differ_by_purpose_and_trial(self):
        a = derive_rng(5, 0, 0).standard_normal(4)
        b = derive_rng(5, 1, 0).standard_normal(4)
        c = derive_rng(5, 0, 1).standard_normal(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_streams_reproducible(self):
        assert np.array_equal(
            derive_rng(5, 3, 2).standard_normal(8), derive_rng(5, 3, 2).standard_normal(8)
        )
