"""Temporally correlated fading: Doppler shift, prediction MMSE, delayed feedback.

The block-to-block fading process has a band-limited Doppler spectrum on
[-F, F] with F < 1/2. CSIT is obtained by noisy filtering (delay d = 0) or
one-step prediction (d = 1) of the pilot observations; the uniform spectrum
admits closed forms, anything else goes through a log-domain quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import FeedbackScheme, ResourceSplit, SchemeKind, SystemConfig
from .rates import qam_message_error, zf_rate_perfect_csit
from .optimize import scan_then_golden_max
from .tradeoff import (
    ParetoPoint,
    downlink_rate_bps,
    feedback_loss,
    max_feedback_len,
    uplink_rate_bps,
    w_of_tfb,
)

LIGHT_SPEED = 2.998e8  # m/s


def kmh_to_mps(v_kmh: float) -> float:
    return v_kmh / 3.6


def doppler_shift(speed: float, carrier: float, block_time: float) -> float:
    """Normalized Doppler shift F = v f_c T_f / c (speed in m/s)."""
    if speed < 0:
        raise ValueError("speed must be nonnegative")
    f = speed * carrier * block_time / LIGHT_SPEED
    if f >= 0.5:
        raise ValueError(f"normalized Doppler shift {f:.3f} violates F < 1/2")
    return f


@dataclass(frozen=True)
class TabulatedSpectrum:
    """Sampled Doppler spectrum on [-F, F]; must be strictly positive and unit power."""

    xi: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if xi.ndim != 1 or xi.shape != vals.shape or xi.size < 2:
            raise ValueError("xi and values must be matching 1-D arrays")
        if np.any(np.diff(xi) <= 0):
            raise ValueError("xi must be strictly increasing")
        if np.any(vals <= 0):
            raise ValueError("spectrum samples must be strictly positive (log-integrability)")
        power = np.trapezoid(vals, xi)
        if abs(power - 1.0) > 1e-6:
            raise ValueError(f"spectrum must integrate to 1, got {power}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class DopplerModel:
    """Mobility model of one user: speed (m/s), carrier (Hz), block duration (s)."""

    speed: float
    carrier: float = 2e9
    block_time: float = 1e-3
    delay: int = 1
    spectrum: TabulatedSpectrum | None = None  # None means uniform on [-F, F]

    def __post_init__(self):
        if self.delay not in (0, 1):
            raise ValueError("only filtering (d=0) and one-step prediction (d=1) are modeled")
        doppler_shift(self.speed, self.carrier, self.block_time)  # range check

    @property
    def shift(self) -> float:
        return doppler_shift(self.speed, self.carrier, self.block_time)

    @classmethod
    def from_kmh(cls, v_kmh: float, **kwargs) -> "DopplerModel":
        return cls(speed=kmh_to_mps(v_kmh), **kwargs)


def obs_noise_var(n_tx: int, t_tr: float, snr: float) -> float:
    """Per-coefficient pilot observation noise delta = N_t / (T_tr rho)."""
    if t_tr <= 0 or snr <= 0:
        raise ValueError("t_tr and snr must be positive")
    return n_tx / (t_tr * snr)


def prediction_mmse(model: DopplerModel, delta: float) -> float:
    """One-step prediction MMSE eps_1(delta) of the fading process.

    Uniform spectrum: delta ((1 + 1/(2 F delta))^{2F} - 1). A tabulated
    spectrum goes through the log-domain integral with trapezoidal quadrature.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    f = model.shift
    if model.spectrum is None:
        if f == 0.0:
            return 0.0  # quasi-static: perfectly predictable
        return delta * math.expm1(2.0 * f * math.log1p(1.0 / (2.0 * f * delta)))
    spec = model.spectrum
    log_int = np.trapezoid(np.log(delta + spec.values), spec.xi)
    return math.exp((1.0 - 2.0 * f) * math.log(delta) + log_int) - delta


def prediction_mmse_quadrature(f: float, delta: float, points: int = 4096) -> float:
    """eps_1 for the uniform spectrum by direct quadrature (verification path)."""
    if delta <= 0 or not 0.0 < f < 0.5:
        raise ValueError("need delta > 0 and 0 < F < 1/2")
    xi = np.linspace(-f, f, points)
    log_int = np.trapezoid(np.log(delta + np.full_like(xi, 1.0 / (2.0 * f))), xi)
    return math.exp((1.0 - 2.0 * f) * math.log(delta) + log_int) - delta


def filtering_mmse(delta: float, eps1: float) -> float:
    """Filtering MMSE eps_0 from eps_1 by maximal-ratio combining."""
    if delta <= 0 or eps1 < 0:
        raise ValueError("invalid MMSE inputs")
    if eps1 == 0.0:
        return 0.0
    return delta * eps1 / (delta + eps1)


def _mmse_ratio(model: DopplerModel, delta: float, exact: bool) -> float:
    """eps_d(delta)/delta for the model's delay, bound form by default."""
    f = model.shift
    if exact:
        if f == 0.0:
            return 0.0  # band limit shrinks to a point: perfectly predictable
        eps1 = prediction_mmse(model, delta)
        eps = eps1 if model.delay == 1 else filtering_mmse(delta, eps1)
        return eps / delta
    # continuous F -> 0 limits of the bound expressions: 1 (d=1) and 1/2 (d=0)
    if model.delay == 1:
        return 1.0 if f == 0.0 else math.exp(2.0 * f * math.log(1.0 / (2.0 * f * delta)))
    return 0.5 if f == 0.0 else 1.0 / (1.0 + (2.0 * f * delta) ** (2.0 * f))


def delayed_rate_gap(model: DopplerModel, split: ResourceSplit, snr: float, n_tx: int,
                     scheme: FeedbackScheme | None = None, exact: bool = False) -> float:
    """Rate gap ln(1 + (N_t-1)/T_tr * eps_d/delta + Delta(T_fb)) in nats.

    The default evaluates the analytic bound the training optimizer uses;
    `exact=True` switches to the exact uniform-spectrum MMSE ratios.
    """
    if split.t_tr < n_tx:
        raise ValueError("training must cover the array (t_tr >= n_tx)")
    delta_obs = obs_noise_var(n_tx, split.t_tr, snr)
    ratio = _mmse_ratio(model, delta_obs, exact)
    fb = feedback_loss(scheme, split.t_fb, n_tx, snr) if scheme is not None else 0.0
    return math.log1p((n_tx - 1) / split.t_tr * ratio + fb)


def kappa(n_tx: int, snr: float, f: float) -> float:
    """Prediction-penalty constant (N_t-1)(rho/(2 F N_t))^{2F}, log-domain."""
    if f == 0.0:
        return float(n_tx - 1)
    return (n_tx - 1) * math.exp(2.0 * f * math.log(snr / (2.0 * f * n_tx)))


@dataclass
class PredictionTrainingResult:
    t_tr: float               # numeric arg max of the net rate
    net_rate: float           # nats per channel use per user
    t_tr_rule: float          # closed-form (kappa T / R_zf)^{1/(2-F)} rule
    t_tr_bound: float         # analytic bound including the feedback loss
    kappa: float
    iterations: int = 0


def optimize_training_prediction(config: SystemConfig, model: DopplerModel, t_fb: float,
                                 scheme: FeedbackScheme | None = None) -> PredictionTrainingResult:
    """Training length under one-step prediction (d=1) at fixed feedback spend.

    Maximizes (1 - T_tr/T)(R_zf - ln(1 + kappa T_tr^{2F-1} + Delta(T_fb)))
    numerically and also reports the closed-form T^{1/(2-F)} training rule
    and the analytic bound derived from it.
    """
    n_tx, snr, t_block = config.n_tx, config.snr, config.block_len
    f_shift = model.shift
    r_zf = zf_rate_perfect_csit(n_tx, snr)
    kap = kappa(n_tx, snr, f_shift)
    delta_fb = feedback_loss(scheme, t_fb, n_tx, snr) if scheme is not None else 0.0
    if math.isinf(delta_fb) or r_zf <= math.log1p(delta_fb):
        return PredictionTrainingResult(float(n_tx), 0.0, float(n_tx), float(n_tx), kap)

    expo = 2.0 * f_shift - 1.0

    def objective(t_tr: float) -> float:
        gap = math.log1p(kap * t_tr ** expo + delta_fb)
        return (1.0 - t_tr / t_block) * max(0.0, r_zf - gap)

    t_tr, iters = scan_then_golden_max(objective, float(n_tx), t_block, points=128)
    net = objective(t_tr)
    if scheme is not None and scheme.kind is SchemeKind.DIGITAL_QAM:
        net *= 1.0 - qam_message_error(scheme.qam_order, snr, t_fb, n_tx)
    rule = (kap * t_block / r_zf) ** (1.0 / (2.0 - f_shift))
    r_eff = r_zf - math.log1p(delta_fb)
    bound = (((n_tx - 1) * t_block / ((1.0 + delta_fb) * r_eff)) ** (1.0 / (2.0 - f_shift))
             * (kap / (n_tx - 1)) ** (1.0 / (2.0 - f_shift)))
    return PredictionTrainingResult(t_tr, net, rule, bound, kap, iters)


def prediction_r_coefficient(config: SystemConfig, model: DopplerModel) -> float:
    """Feedback-loss slope (1 - T_tr/T)/(1 + kappa T_tr^{2F-1}) at the training rule."""
    f_shift = model.shift
    r_zf = zf_rate_perfect_csit(config.n_tx, config.snr)
    kap = kappa(config.n_tx, config.snr, f_shift)
    t_tr = (kap * config.block_len / r_zf) ** (1.0 / (2.0 - f_shift))
    return (1.0 - t_tr / config.block_len) / (1.0 + kap * t_tr ** (2.0 * f_shift - 1.0))


def _tfb_of_lambda_pred(config: SystemConfig, model: DopplerModel,
                        scheme: FeedbackScheme, lam: float) -> float:
    """Weighted-sum stationary t_fb with the prediction-adjusted r factor."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie strictly between 0 and 1")
    n_tx, snr, t_block = config.n_tx, config.snr, config.block_len
    r = prediction_r_coefficient(config, model)
    ratio = lam / (1.0 - lam)
    nn = n_tx * (n_tx - 1)
    c_up = config.uplink_eff
    if scheme.kind is SchemeKind.ANALOG:
        t_fb = math.sqrt(r * nn * t_block * ratio / c_up)
    else:
        log_base = math.log1p(snr) if scheme.kind is SchemeKind.DIGITAL_ERROR_FREE \
            else math.log(scheme.qam_order)
        arg = r * snr * log_base * t_block * ratio / (nn * c_up)
        t_fb = nn / log_base * math.log(arg) if arg > 0 else 0.0
    return min(max(t_fb, 0.0), max_feedback_len(config))


def delayed_pareto(config: SystemConfig, model: DopplerModel, scheme: FeedbackScheme,
                   lambda_grid) -> list[ParetoPoint]:
    """Uplink/downlink boundary under one-step-prediction CSIT."""
    r = prediction_r_coefficient(config, model)
    points = []
    for lam in lambda_grid:
        t_fb = _tfb_of_lambda_pred(config, model, scheme, lam)
        res = optimize_training_prediction(config, model, t_fb, scheme)
        points.append(ParetoPoint(
            lam=lam,
            t_fb=t_fb,
            t_tr=res.t_tr,
            r_down_bps=downlink_rate_bps(config, res.net_rate),
            r_up_bps=uplink_rate_bps(config, t_fb),
            r_factor=r,
        ))
    points.sort(key=lambda p: p.t_fb)
    return points


def rate_vs_speed(config: SystemConfig, scheme: FeedbackScheme, t_fb: float,
                  speeds_kmh) -> list[tuple[float, float]]:
    """Downlink sum rate (bit/s) versus mobile speed at a fixed feedback spend.

    Quasi-static speeds (F = 0) fall back to the block-by-block model; the
    mapping is continuous there because kappa -> N_t - 1 as F -> 0.
    """
    rows = []
    for v in speeds_kmh:
        model = DopplerModel.from_kmh(v, carrier=2e9, block_time=config.block_time)
        if model.shift == 0.0:
            w = w_of_tfb(config, scheme, t_fb).value
        else:
            w = optimize_training_prediction(config, model, t_fb, scheme).net_rate
        rows.append((v, downlink_rate_bps(config, w)))
    return rows
