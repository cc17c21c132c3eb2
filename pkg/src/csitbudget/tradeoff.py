"""Uplink/downlink rate tradeoff when feedback consumes uplink bandwidth.

For a feedback spend of T_fb uplink symbols per block the downlink gets
w(T_fb) = max over training of the net rate, and the uplink keeps
(W_up - T_fb/T_c) Hz for data. Sweeping the weighted-sum multiplier lambda
traces the Pareto boundary between the two rates.

Rate conversions: downlink bit/s = W_c * N_t * w / ln 2, uplink bit/s =
(W_up - T_fb/T_c) * N_t * C_up / ln 2 with C_up in nats. The uplink carries
one stream per served downlink user, which is what reproduces the corner
rates of the reference operating points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import LN2, FeedbackScheme, SchemeKind, SystemConfig
from .optimize import _bisect_gradient_max, _tdd_objective
from .rates import qam_message_error, zf_rate_perfect_csit


@dataclass(frozen=True)
class TrainingOptimum:
    """Inner training maximization: value w, arg max t_tr and the analytic bound."""

    value: float        # nats per channel use per user
    t_tr: float
    t_tr_bound: float


@dataclass(frozen=True)
class ParetoPoint:
    lam: float
    t_fb: float
    t_tr: float
    r_down_bps: float
    r_up_bps: float
    r_factor: float
    t_fb_check: float | None = None   # numeric-maximization verification path


def feedback_loss(scheme: FeedbackScheme, t_fb: float, n_tx: int, snr: float) -> float:
    """CSIT loss term Delta(T_fb) added to the training part of the gap."""
    if scheme.kind is SchemeKind.TDD_OPEN_LOOP:
        return 0.0
    if scheme.kind is SchemeKind.ANALOG:
        if t_fb <= 0:
            return math.inf
        return scheme.feedback_weight(n_tx) / t_fb
    if t_fb < 0:
        raise ValueError("t_fb must be nonnegative")
    denom = n_tx * (n_tx - 1)
    if scheme.kind is SchemeKind.DIGITAL_ERROR_FREE:
        return snr * math.exp(-t_fb / denom * math.log1p(snr))
    return snr * math.exp(-t_fb / denom * math.log(scheme.qam_order))


def _qam_factor(config: SystemConfig, scheme: FeedbackScheme, t_fb: float) -> float:
    if scheme.kind is SchemeKind.DIGITAL_QAM:
        return 1.0 - qam_message_error(scheme.qam_order, config.snr, t_fb, config.n_tx)
    return 1.0


def w_of_tfb(config: SystemConfig, scheme: FeedbackScheme, t_fb: float,
             r_zf: float | None = None, n_gap: float | None = None) -> TrainingOptimum:
    """Net downlink rate at feedback spend t_fb, training optimized out.

    Rewriting the objective shows this is the open-loop TDD problem with
    R_zf -> R_zf - ln(1+Delta) and (N_t-1) -> (N_t-1)/(1+Delta), so the same
    concave gradient bisection applies. `r_zf` / `n_gap` let the many-user
    layer substitute a selection rate and a K-user loss exponent.
    """
    n_tx, t_block = config.n_tx, config.block_len
    if r_zf is None:
        r_zf = zf_rate_perfect_csit(n_tx, config.snr)
    delta = feedback_loss(scheme, t_fb, n_tx, config.snr) if n_gap is None else n_gap
    if math.isinf(delta) or r_zf <= math.log1p(delta):
        return TrainingOptimum(0.0, float(n_tx), float(n_tx))
    r_eff = r_zf - math.log1p(delta)
    theta_eff = (n_tx - 1) / (1.0 + delta)
    f, grad = _tdd_objective(r_eff, theta_eff, t_block)
    t_tr, _ = _bisect_gradient_max(grad, float(n_tx), t_block)
    bound = math.sqrt((n_tx - 1) * t_block / (r_eff * (1.0 + delta)))
    # with an externally supplied loss the caller owns any outage scaling
    factor = _qam_factor(config, scheme, t_fb) if n_gap is None else 1.0
    return TrainingOptimum(f(t_tr) * factor, t_tr, bound)


def w_at_training(config: SystemConfig, scheme: FeedbackScheme, t_fb: float, t_tr: float,
                  r_zf: float | None = None, n_gap: float | None = None) -> float:
    """Model-2 net rate at an explicit training length (no inner optimization).

    Only the training symbols discount the downlink block here; the feedback
    spend lives on the uplink.
    """
    n_tx, t_block = config.n_tx, config.block_len
    if not n_tx <= t_tr <= t_block:
        raise ValueError("training length out of range")
    if r_zf is None:
        r_zf = zf_rate_perfect_csit(n_tx, config.snr)
    delta = feedback_loss(scheme, t_fb, n_tx, config.snr) if n_gap is None else n_gap
    if math.isinf(delta):
        return 0.0
    gap = math.log1p((n_tx - 1) / t_tr + delta)
    value = (1.0 - t_tr / t_block) * max(0.0, r_zf - gap)
    factor = _qam_factor(config, scheme, t_fb) if n_gap is None else 1.0
    return value * factor


def r_coefficient(config: SystemConfig) -> float:
    """Slope coefficient r of the separable lower bound on w(T_fb)."""
    r_zf = zf_rate_perfect_csit(config.n_tx, config.snr)
    a = math.sqrt((config.n_tx - 1) / (config.block_len * r_zf))
    b = math.sqrt(r_zf * (config.n_tx - 1) / config.block_len)
    return (1.0 - a) / (1.0 + b)


def w_lower_bound(config: SystemConfig, scheme: FeedbackScheme, t_fb: float) -> float:
    """Separable closed-form lower bound on w(T_fb): training and feedback
    penalties subtract independently from the perfect-CSIT rate."""
    r_zf = zf_rate_perfect_csit(config.n_tx, config.snr)
    training_penalty = 2.0 * math.sqrt(r_zf * (config.n_tx - 1) / config.block_len)
    delta = feedback_loss(scheme, t_fb, config.n_tx, config.snr)
    if math.isinf(delta):
        return -math.inf
    return r_zf - training_penalty - r_coefficient(config) * delta


def max_feedback_len(config: SystemConfig) -> float:
    """Feedback spend cap: the whole block or the whole uplink band."""
    return min(config.block_len, config.uplink_bw * config.coherence_time)


def tfb_of_lambda(config: SystemConfig, scheme: FeedbackScheme, lam: float) -> float:
    """Closed-form weighted-sum stationary feedback length, clamped to range."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie strictly between 0 and 1")
    n_tx, snr, t_block = config.n_tx, config.snr, config.block_len
    c_up = config.uplink_eff
    r = r_coefficient(config)
    ratio = lam / (1.0 - lam)
    nn = n_tx * (n_tx - 1)
    if scheme.kind is SchemeKind.ANALOG:
        t_fb = math.sqrt(r * nn * t_block * ratio / c_up)
    elif scheme.kind in (SchemeKind.DIGITAL_ERROR_FREE, SchemeKind.DIGITAL_QAM):
        # QAM at its own constellation rate: ln M replaces ln(1+rho)
        log_base = math.log1p(snr) if scheme.kind is SchemeKind.DIGITAL_ERROR_FREE \
            else math.log(scheme.qam_order)
        arg = r * snr * log_base * t_block * ratio / (nn * c_up)
        t_fb = nn / log_base * math.log(arg) if arg > 0 else 0.0
    else:
        raise ValueError("open-loop TDD spends no uplink symbols on feedback")
    return min(max(t_fb, 0.0), max_feedback_len(config))


def downlink_rate_bps(config: SystemConfig, w_nats: float) -> float:
    return config.coherence_bw * config.n_tx * w_nats / LN2


def uplink_rate_bps(config: SystemConfig, t_fb: float) -> float:
    remaining = max(0.0, config.uplink_bw - t_fb / config.coherence_time)
    return remaining * config.n_tx * config.uplink_eff / LN2


def weighted_sum_bps(config: SystemConfig, scheme: FeedbackScheme, lam: float, t_fb: float) -> float:
    w = w_of_tfb(config, scheme, t_fb)
    return lam * downlink_rate_bps(config, w.value) + (1.0 - lam) * uplink_rate_bps(config, t_fb)


def numeric_tfb_of_lambda(config: SystemConfig, scheme: FeedbackScheme, lam: float) -> int:
    """Verification path: integer grid maximization of the weighted rate sum."""
    hi = int(max_feedback_len(config))
    lo = 1 if scheme.kind is SchemeKind.ANALOG else 0
    best_t, best_v = lo, -math.inf
    for t_fb in range(lo, hi + 1):
        v = weighted_sum_bps(config, scheme, lam, float(t_fb))
        if v > best_v:
            best_t, best_v = t_fb, v
    return best_t


def pareto_boundary(config: SystemConfig, scheme: FeedbackScheme,
                    lambda_grid, verify: bool = True) -> list[ParetoPoint]:
    """Uplink/downlink boundary traced by the closed-form t_fb(lambda).

    Each point also carries the integer numeric-maximization answer in
    `t_fb_check` so the two routes can be compared; points come out sorted
    by increasing feedback spend.
    """
    r = r_coefficient(config)
    points = []
    for lam in lambda_grid:
        t_fb = tfb_of_lambda(config, scheme, lam)
        w = w_of_tfb(config, scheme, t_fb)
        check = float(numeric_tfb_of_lambda(config, scheme, lam)) if verify else None
        points.append(ParetoPoint(
            lam=lam,
            t_fb=t_fb,
            t_tr=w.t_tr,
            r_down_bps=downlink_rate_bps(config, w.value),
            r_up_bps=uplink_rate_bps(config, t_fb),
            r_factor=r,
            t_fb_check=check,
        ))
    points.sort(key=lambda p: p.t_fb)
    return points
