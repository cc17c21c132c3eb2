"""Closed-form rates, rate gaps and feedback error probabilities.

Everything here is a pure scalar function; rates are in nats per channel
use per user throughout. Conversion to bits and bit/s happens only at the
reporting layer (see `config.sum_rate_bps`).
"""

from __future__ import annotations

import math

from .config import FeedbackScheme, ResourceSplit, SchemeKind

_EULER_GAMMA = 0.5772156649015329


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!), fast for x <= 1
    total = -_EULER_GAMMA - math.log(x)
    term = 1.0
    for k in range(1, 60):
        term *= -x / k
        contrib = -term / k
        total += contrib
        if abs(contrib) < 1e-18 * abs(total):
            break
    return total


def _e1_cf_scaled(x: float) -> float:
    # modified Lentz continued fraction for e^x E1(x), x > 1
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 400):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def exp_integral_e1(x: float) -> float:
    """Exponential integral E1(x) = int_x^inf e^-t / t dt for x > 0."""
    if x <= 0:
        raise ValueError(f"E1 requires x > 0, got {x}")
    if x <= 1.0:
        return _e1_series(x)
    return math.exp(-x) * _e1_cf_scaled(x)


def scaled_exp_integral(x: float) -> float:
    """e^x E1(x), stable for arbitrarily large x (no overflow)."""
    if x <= 0:
        raise ValueError(f"scaled E1 requires x > 0, got {x}")
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_cf_scaled(x)


def zf_rate_perfect_csit(n_tx: int, snr: float) -> float:
    """Per-user ergodic ZF rate with perfect CSIT and K = N_t equal-power users.

    The useful beamforming gain is Exp(1)-distributed, so the expectation
    E[ln(1 + (rho/N_t) X)] has the closed form e^{N_t/rho} E1(N_t/rho).
    """
    if n_tx < 2:
        raise ValueError("need n_tx >= 2")
    if snr <= 0:
        raise ValueError("snr must be positive")
    return scaled_exp_integral(n_tx / snr)


def gaussian_q(x: float) -> float:
    """Tail probability Q(x) of the standard normal, via erfc."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def gap_g(scheme: FeedbackScheme, split: ResourceSplit, snr: float, n_tx: int) -> float:
    """Interference-to-noise scaling g of the rate gap ln(1 + g).

    Training contributes theta_tr / T_tr for every scheme; the feedback term
    depends on the strategy: theta_fb / T_fb (analog), rho (1+rho)^{-T_fb/(N_t(N_t-1))}
    (digital at uplink capacity) or rho M^{-T_fb/(N_t(N_t-1))} (uncoded M-QAM,
    error handling lives in the joint optimizer).
    """
    if split.t_tr <= 0:
        raise ValueError("training length must be positive to form a channel estimate")
    g = scheme.training_weight(n_tx) / split.t_tr
    if scheme.kind is SchemeKind.TDD_OPEN_LOOP:
        return g
    if scheme.kind is SchemeKind.ANALOG:
        if split.t_fb <= 0:
            raise ValueError("analog feedback requires t_fb > 0")
        return g + scheme.feedback_weight(n_tx) / split.t_fb
    denom = n_tx * (n_tx - 1)
    if scheme.kind is SchemeKind.DIGITAL_ERROR_FREE:
        return g + snr * math.exp(-split.t_fb / denom * math.log1p(snr))
    # DIGITAL_QAM
    return g + snr * math.exp(-split.t_fb / denom * math.log(scheme.qam_order))


def rate_gap(g: float) -> float:
    """Rate gap ln(1 + g) in nats."""
    if g < 0:
        raise ValueError("g must be nonnegative")
    return math.log1p(g)


def net_spectral_efficiency(r_zf: float, gap_nats: float, t_overhead: float, t_block: float) -> float:
    """Overhead-discounted per-user rate (1 - T_t/T) max(0, R_zf - gap)."""
    if not 0.0 <= t_overhead <= t_block:
        raise ValueError(f"overhead {t_overhead} must lie in [0, {t_block}]")
    return (1.0 - t_overhead / t_block) * max(0.0, r_zf - gap_nats)


def qam_symbol_error(m: int, snr: float) -> float:
    """Symbol error probability of square M-QAM on the AWGN uplink."""
    root = math.isqrt(m)
    if m < 4 or root * root != m or (m & (m - 1)) != 0:
        raise ValueError(f"M must be a square QAM size (4, 16, 64, ...), got {m}")
    if snr <= 0:
        raise ValueError("snr must be positive")
    q = gaussian_q(math.sqrt(3.0 * snr / (m - 1)))
    inner = 1.0 - 2.0 * (1.0 - 1.0 / root) * q
    return 1.0 - inner * inner


def feedback_error_prob(p_s: float, t_fb: float, n_tx: int) -> float:
    """Probability that a user's feedback message contains any symbol error.

    Each user sends t_fb / N_t symbols; a fractional symbol count is
    evaluated as-is (the error exponent is what matters).
    """
    if not 0.0 <= p_s <= 1.0:
        raise ValueError("p_s must be a probability")
    if t_fb < 0:
        raise ValueError("t_fb must be nonnegative")
    if t_fb == 0:
        return 0.0
    if p_s == 1.0:
        return 1.0
    return -math.expm1(t_fb / n_tx * math.log1p(-p_s))


def qam_message_error(m: int, snr: float, t_fb: float, n_tx: int) -> float:
    """Composition of symbol- and message-level error for M-QAM feedback."""
    return feedback_error_prob(qam_symbol_error(m, snr), t_fb, n_tx)


def digital_gap_from_bits(bits: float, n_tx: int, snr: float, t_tr: float) -> float:
    """g for B-bit quantized feedback received error-free."""
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    if t_tr <= 0:
        raise ValueError("training length must be positive")
    return (n_tx - 1) / t_tr + snr * 2.0 ** (-bits / (n_tx - 1))
