"""Closed-form rate/gap/error expressions against independent oracles."""

import math

import numpy as np
import pytest
import scipy.integrate
import scipy.special

from csitbudget import (
    ResourceSplit,
    analog,
    digital_error_free,
    digital_gap_from_bits,
    digital_qam,
    exp_integral_e1,
    feedback_error_prob,
    gap_g,
    gaussian_q,
    net_spectral_efficiency,
    qam_symbol_error,
    rate_gap,
    tdd_open_loop,
    zf_rate_perfect_csit,
)
from csitbudget.rates import scaled_exp_integral


class TestExpIntegral:
    def test_series_value(self):
        assert exp_integral_e1(0.4) == pytest.approx(0.702380, abs=5e-7)

    def test_small_argument(self):
        assert exp_integral_e1(0.04) == pytest.approx(2.681264, abs=5e-7)

    @pytest.mark.parametrize("x", np.geomspace(1e-3, 50.0, 25))
    def test_against_scipy(self, x):
        assert exp_integral_e1(x) == pytest.approx(scipy.special.exp1(x), rel=1e-10)

    def test_against_quadrature(self):
        # direct numerical evaluation of the defining integral
        for x in (0.3, 1.7, 6.0):
            val, _ = scipy.integrate.quad(lambda t: math.exp(-t) / t, x, np.inf)
            assert exp_integral_e1(x) == pytest.approx(val, rel=1e-9)

    @pytest.mark.parametrize("x", np.geomspace(1e-2, 200.0, 20))
    def test_envelope(self, x):
        # standard bracketing x e^x E1(x) in (x/(x+1), 1)
        scaled = x * scaled_exp_integral(x)
        assert x / (x + 1.0) < scaled < 1.0

    def test_decreasing_with_tail_bound(self):
        xs = np.geomspace(0.5, 80.0, 12)
        vals = [exp_integral_e1(x) for x in xs]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        for x, v in zip(xs, vals):
            assert v <= math.exp(-x) / x

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            exp_integral_e1(x)


class TestZfRate:
    def test_reference_point(self):
        assert zf_rate_perfect_csit(4, 10.0) == pytest.approx(1.0478280, abs=1e-6)

    def test_high_snr_point(self):
        assert zf_rate_perfect_csit(4, 100.0) == pytest.approx(2.7906881, abs=1e-6)

    def test_vanishes_at_zero_snr(self):
        assert zf_rate_perfect_csit(4, 1e-9) < 1e-7

    @pytest.mark.parametrize("n_tx", [2, 4, 8])
    @pytest.mark.parametrize("snr", [1.0, 10.0, 100.0])
    def test_monte_carlo_oracle(self, n_tx, snr):
        # E[ln(1 + (rho/Nt) X)] with X ~ Exp(1), 1e7 draws
        rng = np.random.default_rng(41 + n_tx)
        x = rng.exponential(1.0, 10_000_000)
        samples = np.log1p(snr / n_tx * x)
        mean = samples.mean()
        stderr = samples.std(ddof=1) / math.sqrt(samples.size)
        assert zf_rate_perfect_csit(n_tx, snr) == pytest.approx(mean, abs=3 * stderr)


class TestGap:
    def test_tdd(self):
        assert gap_g(tdd_open_loop(), ResourceSplit(24, 0), 10.0, 4) == pytest.approx(0.125)

    def test_analog(self):
        assert gap_g(analog(), ResourceSplit(10, 20), 10.0, 4) == pytest.approx(0.9)

    def test_digital_errorfree(self):
        import mpmath

        expect = float(0.125 + 10 * mpmath.mpf(11) ** (mpmath.mpf("-28.5") / 12))
        got = gap_g(digital_error_free(), ResourceSplit(24, 28.5), 10.0, 4)
        assert got == pytest.approx(expect, rel=1e-12)

    def test_qam_kind(self):
        got = gap_g(digital_qam(4), ResourceSplit(24, 28.5), 10.0, 4)
        assert got == pytest.approx(0.125 + 10 * 4 ** (-28.5 / 12), rel=1e-12)

    @pytest.mark.parametrize("scheme", [tdd_open_loop(), analog(), digital_error_free(), digital_qam(4)])
    def test_decreasing_in_training_and_feedback(self, scheme):
        for t_tr in (6.0, 12.0, 30.0):
            for t_fb in (8.0, 20.0, 60.0):
                base = gap_g(scheme, ResourceSplit(t_tr, t_fb), 10.0, 4)
                assert gap_g(scheme, ResourceSplit(t_tr + 1, t_fb), 10.0, 4) < base
                more_fb = gap_g(scheme, ResourceSplit(t_tr, t_fb + 1), 10.0, 4)
                if scheme.kind is tdd_open_loop().kind:
                    assert more_fb == base
                else:
                    assert more_fb < base

    def test_zero_training_rejected(self):
        with pytest.raises(ValueError):
            gap_g(tdd_open_loop(), ResourceSplit(0.0, 0.0), 10.0, 4)
        with pytest.raises(ValueError):
            gap_g(analog(), ResourceSplit(10.0, 0.0), 10.0, 4)


class TestRateGap:
    def test_values(self):
        assert rate_gap(0.0) == 0.0
        assert rate_gap(0.125) == pytest.approx(math.log(1.125), rel=1e-14)
        assert rate_gap(math.e - 1.0) == pytest.approx(1.0, rel=1e-14)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            rate_gap(-0.1)


class TestNetSpectralEfficiency:
    def test_reference_point(self):
        got = net_spectral_efficiency(1.0478280, math.log(1.125), 24, 200)
        assert got == pytest.approx(0.88 * (1.0478280 - math.log(1.125)), rel=1e-12)

    def test_zero_overhead_identity(self):
        assert net_spectral_efficiency(0.7, 0.0, 0.0, 200) == pytest.approx(0.7)

    def test_clamps_at_zero(self):
        assert net_spectral_efficiency(0.5, 0.9, 10, 200) == 0.0

    def test_overhead_beyond_block_rejected(self):
        with pytest.raises(ValueError):
            net_spectral_efficiency(1.0, 0.1, 201, 200)

    def test_concave_in_training(self):
        # negated second difference of the TDD net rate on a grid
        def f(t):
            return net_spectral_efficiency(1.0478280, rate_gap(3.0 / t), t, 200)

        ts = np.arange(5.0, 180.0, 1.0)
        vals = np.array([f(t) for t in ts])
        second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
        assert np.all(second <= 1e-12)


class TestQamErrors:
    def test_4qam_at_10db(self):
        # oracle: Gaussian tail by quadrature
        q, _ = scipy.integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi),
                                    math.sqrt(10.0), np.inf)
        expect = 1.0 - (1.0 - 2 * 0.5 * q) ** 2
        assert qam_symbol_error(4, 10.0) == pytest.approx(expect, rel=1e-9)
        assert qam_symbol_error(4, 10.0) == pytest.approx(1.5648e-3, rel=1e-3)

    def test_large_constellation(self):
        q, _ = scipy.integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi),
                                    math.sqrt(30.0 / 1023.0), np.inf)
        expect = 1.0 - (1.0 - 2 * (1 - 1 / 32) * q) ** 2
        assert qam_symbol_error(1024, 10.0) == pytest.approx(expect, rel=1e-9)

    def test_vanishes_at_high_snr(self):
        assert qam_symbol_error(4, 1e4) < 1e-12

    @pytest.mark.parametrize("m", [2, 8, 9, 32, 100])
    def test_non_square_rejected(self, m):
        with pytest.raises(ValueError):
            qam_symbol_error(m, 10.0)

    def test_q_function_accuracy(self):
        for x in (0.5, 2.0, 5.0):
            val, _ = scipy.integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi),
                                          x, np.inf)
            assert gaussian_q(x) == pytest.approx(val, rel=1e-12)


class TestFeedbackErrorProb:
    def test_paper_operating_point(self):
        # Nt=4 at 10 dB, B=25 bits over 4-QAM -> T_fb = 50 symbols
        p_s = qam_symbol_error(4, 10.0)
        assert feedback_error_prob(p_s, 50, 4) == pytest.approx(0.0194, abs=2e-4)

    def test_zero_symbol_error(self):
        assert feedback_error_prob(0.0, 100, 4) == 0.0

    def test_single_symbol(self):
        assert feedback_error_prob(0.3, 4, 4) == pytest.approx(0.3, rel=1e-12)

    def test_bit_level_monte_carlo(self):
        # independent QAM link simulation: 4-QAM symbols + CN noise,
        # nearest-neighbor detection, message = 12.5 symbols per user
        rng = np.random.default_rng(7)
        n = 1_000_000
        snr = 10.0
        pts = (np.array([1, -1]) / math.sqrt(2))
        sym = (rng.choice(pts, n) + 1j * rng.choice(pts, n))
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
        rx = math.sqrt(snr) * sym + noise
        det = (np.sign(rx.real) + 1j * np.sign(rx.imag)) / math.sqrt(2)
        errs = det != sym
        p_emp = errs.mean()
        sigma = math.sqrt(p_emp * (1 - p_emp) / n)
        assert qam_symbol_error(4, snr) == pytest.approx(p_emp, abs=3 * sigma)
        # message error over groups of 12 symbols (integer group size)
        groups = errs[: n - n % 12].reshape(-1, 12)
        msg_emp = groups.any(axis=1).mean()
        msg_sigma = math.sqrt(msg_emp * (1 - msg_emp) / groups.shape[0])
        expect = feedback_error_prob(qam_symbol_error(4, snr), 48, 4)
        assert expect == pytest.approx(msg_emp, abs=3 * msg_sigma)


class TestDigitalGapFromBits:
    def test_zero_bits(self):
        assert digital_gap_from_bits(0, 4, 10.0, 24) == pytest.approx(10.125)

    def test_reference_point(self):
        import mpmath

        expect = float(mpmath.mpf("0.125") + 10 * mpmath.mpf(2) ** (mpmath.mpf(-25) / 3))
        assert digital_gap_from_bits(25, 4, 10.0, 24) == pytest.approx(expect, rel=1e-12)

    def test_perfect_quantizer_limit(self):
        assert digital_gap_from_bits(5000, 4, 10.0, 24) == pytest.approx(0.125, rel=1e-12)

    def test_zero_training_rejected(self):
        with pytest.raises(ValueError):
            digital_gap_from_bits(10, 4, 10.0, 0.0)
