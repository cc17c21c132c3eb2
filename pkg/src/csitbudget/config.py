"""System and feedback-scheme configuration types."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

LN2 = math.log(2.0)


class SchemeKind(Enum):
    """How the base station acquires CSIT."""

    TDD_OPEN_LOOP = "tdd"          # uplink pilots + reciprocity, no feedback
    ANALOG = "analog"              # unquantized coefficients on the uplink
    DIGITAL_ERROR_FREE = "digital" # quantized feedback at uplink capacity
    DIGITAL_QAM = "qam"            # quantized feedback over uncoded square QAM


def _is_square_qam(m: int) -> bool:
    # square QAM with an integer number of bits per axis: M = 4, 16, 64, 256, ...
    if m < 4:
        return False
    root = math.isqrt(m)
    return root * root == m and (m & (m - 1)) == 0


@dataclass(frozen=True)
class FeedbackScheme:
    """Feedback strategy plus its resource weights.

    theta_tr / theta_fb default to N_t - 1 and N_t (N_t - 1) respectively and
    are resolved against the antenna count at evaluation time, so one scheme
    object can serve configs with different array sizes.
    """

    kind: SchemeKind
    theta_tr: float | None = None
    theta_fb: float | None = None
    qam_order: int = 4
    fb_bits: float | None = None

    def __post_init__(self):
        if self.theta_tr is not None and self.theta_tr <= 0:
            raise ValueError("theta_tr must be positive")
        if self.theta_fb is not None:
            if self.theta_fb < 0:
                raise ValueError("theta_fb must be nonnegative")
            if (self.theta_fb == 0) != (self.kind is SchemeKind.TDD_OPEN_LOOP):
                raise ValueError("theta_fb == 0 exactly for the open-loop TDD scheme")
        if self.kind is SchemeKind.DIGITAL_QAM and not _is_square_qam(self.qam_order):
            raise ValueError(f"qam_order must be a square QAM size (4, 16, 64, ...), got {self.qam_order}")
        if self.fb_bits is not None and self.fb_bits < 0:
            raise ValueError("fb_bits must be nonnegative")

    def training_weight(self, n_tx: int) -> float:
        return float(self.theta_tr) if self.theta_tr is not None else float(n_tx - 1)

    def feedback_weight(self, n_tx: int) -> float:
        if self.kind is SchemeKind.TDD_OPEN_LOOP:
            return 0.0
        return float(self.theta_fb) if self.theta_fb is not None else float(n_tx * (n_tx - 1))


def tdd_open_loop() -> FeedbackScheme:
    return FeedbackScheme(SchemeKind.TDD_OPEN_LOOP)


def analog() -> FeedbackScheme:
    return FeedbackScheme(SchemeKind.ANALOG)


def digital_error_free() -> FeedbackScheme:
    return FeedbackScheme(SchemeKind.DIGITAL_ERROR_FREE)


def digital_qam(order: int = 4, fb_bits: float | None = None) -> FeedbackScheme:
    return FeedbackScheme(SchemeKind.DIGITAL_QAM, qam_order=order, fb_bits=fb_bits)


ALL_SCHEMES = (tdd_open_loop(), analog(), digital_error_free(), digital_qam())


@dataclass(frozen=True)
class SystemConfig:
    """Downlink geometry: antennas, SNR and the time-frequency block.

    Defaults reproduce the running LTE-like example: one 200 kHz x 1 ms
    resource block (T = 200 channel uses), N_t = 4 antennas at 10 dB with a
    symmetric 200 kHz uplink carrying 1.512 bit/s/Hz per user.

    All rates are carried internally in nats per channel use; `uplink_eff`
    is therefore in nats. Use `from_db` / `uplink_eff_bits` at the edges.
    """

    n_tx: int = 4
    n_users: int = 4
    snr: float = 10.0                    # linear rho = P / N0
    block_len: float = 200.0             # T channel uses per coherence block
    coherence_time: float = 1e-3         # T_c  [s]
    coherence_bw: float = 200e3          # W_c  [Hz]
    block_time: float = 1e-3             # T_f  [s]
    block_bw: float = 200e3              # W_f  [Hz]
    uplink_bw: float = 200e3             # W_up [Hz]
    uplink_eff: float = 1.512 * LN2      # C_up [nats per channel use]

    def __post_init__(self):
        if self.n_tx < 2:
            raise ValueError("need at least 2 transmit antennas")
        if self.n_users < self.n_tx:
            raise ValueError("user count must be at least the antenna count")
        for name in ("snr", "block_len", "coherence_time", "coherence_bw",
                     "block_time", "block_bw", "uplink_bw", "uplink_eff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        t_coh = self.coherence_bw * self.coherence_time
        t_blk = self.block_bw * self.block_time
        if not (math.isclose(self.block_len, t_coh, rel_tol=1e-9)
                or math.isclose(self.block_len, t_blk, rel_tol=1e-9)):
            raise ValueError(
                "block_len must equal coherence_bw*coherence_time or block_bw*block_time "
                f"(got T={self.block_len}, W_c*T_c={t_coh}, W_f*T_f={t_blk})")

    @classmethod
    def from_db(cls, snr_db: float = 10.0, **kwargs) -> "SystemConfig":
        return cls(snr=10.0 ** (snr_db / 10.0), **kwargs)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)

    @property
    def uplink_eff_bits(self) -> float:
        return self.uplink_eff / LN2

    def with_block_len(self, t: float) -> "SystemConfig":
        """Same radio parameters on a block of `t` channel uses (T_c rescaled)."""
        return replace(self, block_len=float(t), coherence_time=t / self.coherence_bw)


@dataclass(frozen=True)
class ResourceSplit:
    """A (training, feedback) allocation inside one coherence block."""

    t_tr: float
    t_fb: float = 0.0

    def __post_init__(self):
        if self.t_tr < 0 or self.t_fb < 0:
            raise ValueError("training/feedback lengths must be nonnegative")

    @property
    def t_total(self) -> float:
        return self.t_tr + self.t_fb


@dataclass(frozen=True)
class RateResult:
    """Per-user rate before/after overhead discount, optionally in bit/s."""

    per_user_rate: float                 # nats per channel use
    net_per_user: float                  # overhead-discounted nats per channel use
    sum_rate_bps: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.net_per_user <= self.per_user_rate + 1e-12):
            raise ValueError("net rate must lie in [0, per_user_rate]")


def sum_rate_bps(rate_nats: float, bandwidth_hz: float, n_served: int) -> float:
    """Sum rate in bit/s: bandwidth * served users * per-user nats / ln 2."""
    return bandwidth_hz * n_served * rate_nats / LN2
