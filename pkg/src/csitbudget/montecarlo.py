"""Monte Carlo validation lab: channels, estimation, RVQ, ZF, user selection.

Everything is driven by numpy's seeded PCG64 generator; a given seed yields
a bit-identical stream of channels, estimates, quantizations and selections
on one platform (fixed chunking, fixed generation order). Heavy batches are
processed in fixed-size chunks so memory stays flat.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import FeedbackScheme, SchemeKind, SystemConfig
from .rates import qam_message_error, rate_gap, zf_rate_perfect_csit
from .tradeoff import downlink_rate_bps, uplink_rate_bps, w_of_tfb

_CHUNK = 4096


# ---------------------------------------------------------------------------
# CSIT sources


@dataclass(frozen=True)
class PerfectCsit:
    pass


@dataclass(frozen=True)
class MmseCsit:
    """BS knows the users' pilot-based LMMSE estimates (TDD reciprocity)."""

    t_tr: float


@dataclass(frozen=True)
class AnalogCsit:
    """Estimates forwarded as unquantized symbols over the AWGN uplink."""

    t_tr: float
    t_fb: float


@dataclass(frozen=True)
class RvqCsit:
    """Estimated directions quantized with a B-bit random vector quantizer."""

    t_tr: float
    bits: float


@dataclass
class McEstimate:
    mean: float
    stderr: float
    blocks: int


@dataclass
class ChannelBatch:
    """A reproducible batch of K x N_t channel matrices."""

    realizations: np.ndarray
    seed: int
    count: int


@dataclass
class SelectionOutcome:
    chosen: tuple[int, ...]
    sum_rate: float
    per_user: np.ndarray


# ---------------------------------------------------------------------------
# channel + estimation primitives


def draw_channels(n_blocks: int, n_users: int, n_tx: int, rng: np.random.Generator) -> np.ndarray:
    """(n_blocks, n_users, n_tx) iid standard circular complex Gaussian entries."""
    shape = (n_blocks, n_users, n_tx)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def channel_batch(n_blocks: int, n_users: int, n_tx: int, seed: int) -> ChannelBatch:
    rng = np.random.default_rng(seed)
    return ChannelBatch(draw_channels(n_blocks, n_users, n_tx, rng), seed, n_blocks)


def mmse_estimate(channels: np.ndarray, t_tr: float, snr: float, n_tx: int,
                  rng: np.random.Generator):
    """Per-coefficient LMMSE estimate from the shared pilot observation.

    Returns (estimate, error_variance) with the analytic error variance
    1 / (1 + (T_tr/N_t) rho); the estimate is the exact conditional mean, so
    its empirical error matches that value.
    """
    if t_tr < n_tx:
        raise ValueError("need t_tr >= n_tx pilot symbols to excite the array")
    a = t_tr * snr / n_tx
    noise = (rng.standard_normal(channels.shape)
             + 1j * rng.standard_normal(channels.shape)) / math.sqrt(2.0)
    est = (a / (a + 1.0)) * channels + (math.sqrt(a) / (a + 1.0)) * noise
    return est, 1.0 / (1.0 + a)


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=-1, keepdims=True)


def analog_forward(estimates: np.ndarray, t_tr: float, t_fb: float, snr: float,
                   n_tx: int, rng: np.random.Generator) -> np.ndarray:
    """BS-side estimate after analog feedback of the users' estimates.

    Each coefficient occupies t_fb / N_t^2 uplink uses at SNR rho and is MMSE
    combined at the BS; the chain collapses to the exact equivalent
    alpha * est + sqrt(q alpha (1-alpha)) noise with alpha = n rho/(1 + n rho)
    and q the estimate power.
    """
    if t_fb <= 0:
        raise ValueError("analog feedback needs t_fb > 0")
    reps = t_fb / n_tx ** 2
    a = t_tr * snr / n_tx
    q = a / (a + 1.0)
    alpha = reps * snr / (1.0 + reps * snr)
    noise = (rng.standard_normal(estimates.shape)
             + 1j * rng.standard_normal(estimates.shape)) / math.sqrt(2.0)
    return alpha * estimates + math.sqrt(q * alpha * (1.0 - alpha)) * noise


def rvq_distortion_sample(bits: float, n_tx: int, rng: np.random.Generator,
                          size) -> np.ndarray:
    """Exact RVQ ensemble distortion sin^2(theta) for a 2^B-codeword codebook.

    A random codeword's squared cosine to the target direction is
    Beta(1, N_t - 1), so sin^2 of the best of 2^B independent codewords has
    CDF 1 - (1 - s^{N_t-1})^{2^B}; inverse-transform sampling handles any
    real-valued B without materializing a codebook.
    """
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    u = rng.random(size)
    w = np.exp2(-bits) * np.log1p(-u)
    return (-np.expm1(w)) ** (1.0 / (n_tx - 1))


def rvq_quantize(direction: np.ndarray, bits: int, rng: np.random.Generator):
    """Quantize a unit vector against an explicit random codebook.

    Returns (index, codeword, sin^2 distortion). Codebooks above 2^20
    entries are refused; use `rvq_distortion_sample` for the ensemble model.
    """
    if not (isinstance(bits, (int, np.integer)) and 0 <= bits <= 20):
        raise ValueError("explicit codebooks support integer 0 <= bits <= 20")
    direction = np.asarray(direction)
    n_tx = direction.shape[-1]
    size = 1 << int(bits)
    codebook = (rng.standard_normal((size, n_tx))
                + 1j * rng.standard_normal((size, n_tx))) / math.sqrt(2.0)
    codebook = _unit_rows(codebook)
    gains = np.abs(codebook @ direction.conj()) ** 2
    idx = int(np.argmax(gains))
    return idx, codebook[idx], float(1.0 - gains[idx])


def rvq_forward(estimates: np.ndarray, bits: float, rng: np.random.Generator) -> np.ndarray:
    """Quantized estimate directions under the RVQ ensemble model."""
    dirs = _unit_rows(estimates)
    n_blocks, n_users, n_tx = dirs.shape
    s = rvq_distortion_sample(bits, n_tx, rng, (n_blocks, n_users, 1))
    raw = (rng.standard_normal(dirs.shape) + 1j * rng.standard_normal(dirs.shape)) / math.sqrt(2.0)
    # random unit vector in the orthogonal complement of each direction
    perp = raw - np.sum(raw * dirs.conj(), axis=-1, keepdims=True) * dirs
    perp = _unit_rows(perp)
    return np.sqrt(1.0 - s) * dirs + np.sqrt(s) * perp


def zf_beamformers(estimates: np.ndarray) -> np.ndarray:
    """Unit-norm ZF beamformers for a (..., K=N_t, N_t) estimate batch.

    Column k of the result is orthogonal to every estimated user row j != k.
    """
    a = np.conj(estimates)  # rows are h_k^H
    v = np.linalg.inv(a)
    return v / np.linalg.norm(v, axis=-2, keepdims=True)


def _zf_rates_per_block(channels: np.ndarray, csit: np.ndarray, snr: float) -> np.ndarray:
    """Per-block user-averaged ZF rate given true channels and BS-side CSIT."""
    n_tx = channels.shape[-1]
    v = zf_beamformers(csit)
    cross = np.abs(np.conj(channels) @ v) ** 2     # [b, k, j] = |h_k^H v_j|^2
    signal = np.einsum("...kk->...k", cross)
    interference = cross.sum(axis=-1) - signal
    sinr = (snr / n_tx) * signal / (1.0 + (snr / n_tx) * interference)
    return np.log1p(sinr).mean(axis=-1)


def _bs_csit(chunk: np.ndarray, source, snr: float, n_tx: int,
             rng: np.random.Generator) -> np.ndarray:
    if isinstance(source, PerfectCsit):
        return chunk
    est, _ = mmse_estimate(chunk, source.t_tr, snr, n_tx, rng)
    if isinstance(source, MmseCsit):
        return est
    if isinstance(source, AnalogCsit):
        return analog_forward(est, source.t_tr, source.t_fb, snr, n_tx, rng)
    if isinstance(source, RvqCsit):
        return rvq_forward(est, source.bits, rng)
    raise TypeError(f"unknown CSIT source {source!r}")


def ergodic_rate_mc(config: SystemConfig, csit_source, blocks: int, seed: int = 0,
                    chunk: int = _CHUNK) -> McEstimate:
    """Ergodic per-user ZF rate by simulation for one CSIT acquisition chain."""
    rng = np.random.default_rng(seed)
    n_tx, snr = config.n_tx, config.snr
    rates = np.empty(blocks)
    done = 0
    while done < blocks:
        n = min(chunk, blocks - done)
        channels = draw_channels(n, n_tx, n_tx, rng)
        csit = _bs_csit(channels, csit_source, snr, n_tx, rng)
        rates[done:done + n] = _zf_rates_per_block(channels, csit, snr)
        done += n
    mean = float(rates.mean())
    stderr = float(rates.std(ddof=1) / math.sqrt(blocks))
    return McEstimate(mean, stderr, blocks)


def rate_lower_bound(config: SystemConfig, csit_source) -> float:
    """Closed-form companion bound R_zf - ln(1+g) for a simulated CSIT chain."""
    n_tx, snr = config.n_tx, config.snr
    r_zf = zf_rate_perfect_csit(n_tx, snr)
    if isinstance(csit_source, PerfectCsit):
        return r_zf
    g = (n_tx - 1) / csit_source.t_tr
    if isinstance(csit_source, AnalogCsit):
        g += n_tx * (n_tx - 1) / csit_source.t_fb
    elif isinstance(csit_source, RvqCsit):
        g += snr * 2.0 ** (-csit_source.bits / (n_tx - 1))
    return r_zf - rate_gap(g)


# ---------------------------------------------------------------------------
# user selection


def _zf_sum_rates_for_sets(h_sel: np.ndarray, snr: float) -> np.ndarray:
    """Equal-power ZF sum rate for each (.., m, N_t) user set in a batch."""
    m = h_sel.shape[-2]
    gram = h_sel @ np.conj(np.swapaxes(h_sel, -1, -2))
    inv_diag = np.einsum("...kk->...k", np.linalg.inv(gram)).real
    gains = 1.0 / inv_diag
    return np.log1p((snr / m) * gains).sum(axis=-1)


def zf_selection_sum_rate(channels: np.ndarray, n_tx: int, snr: float):
    """Greedy sum-rate user selection, vectorized over a (n, K, N_t) batch.

    Users are added one at a time, each round admitting the candidate that
    maximizes the equal-power ZF sum rate of the enlarged set; a block stops
    early when no candidate improves on its current rate.

    Returns (sum_rates, chosen) where chosen is (n, N_t) with -1 padding.
    """
    n_blocks, n_users, dim = channels.shape
    chosen = -np.ones((n_blocks, n_tx), dtype=np.int64)
    best_rate = np.zeros(n_blocks)
    active = np.ones(n_blocks, dtype=bool)
    taken = np.zeros((n_blocks, n_users), dtype=bool)
    sel = np.zeros((n_blocks, 0, dim), dtype=channels.dtype)

    for round_i in range(n_tx):
        if not active.any():
            break
        sel = np.concatenate([sel, np.zeros((n_blocks, 1, dim), dtype=channels.dtype)], axis=1)
        idx = np.nonzero(active)[0]
        a = idx.size
        sel_act = sel[idx, :round_i]                # (a, round_i, Nt)
        # candidate sets: current selection plus each not-yet-taken user; rows of
        # already-taken users are swapped for a placeholder so no Gram matrix in
        # the batch is exactly singular (their scores are masked out below)
        placeholder = np.zeros(dim, dtype=channels.dtype)
        placeholder[0] = 1.0
        ch_mod = np.where(taken[idx][:, :, None], placeholder, channels[idx])
        cand = np.concatenate(
            [np.broadcast_to(sel_act[:, None], (a, n_users, round_i, dim)),
             ch_mod[:, :, None, :]], axis=2)         # (a, K, round_i+1, Nt)
        rates = _zf_sum_rates_for_sets(cand, snr)    # (a, K)
        rates[taken[idx]] = -np.inf
        pick = np.argmax(rates, axis=1)
        pick_rate = rates[np.arange(a), pick]
        improves = pick_rate > best_rate[idx] + 1e-12
        good = idx[improves]
        chosen[good, round_i] = pick[improves]
        best_rate[good] = pick_rate[improves]
        taken[good, pick[improves]] = True
        sel[good, round_i] = channels[good, pick[improves]]
        active[idx[~improves]] = False
    return best_rate, chosen


def greedy_user_selection(channels: np.ndarray, n_tx: int, snr: float) -> SelectionOutcome:
    """Greedy selection of up to N_t users from one K x N_t channel matrix."""
    channels = np.asarray(channels)
    if channels.ndim != 2:
        raise ValueError("expected a single K x N_t matrix")
    sums, chosen = zf_selection_sum_rate(channels[None], n_tx, snr)
    picked = tuple(int(u) for u in chosen[0] if u >= 0)
    h_sel = channels[list(picked)]
    gram = h_sel @ h_sel.conj().T
    gains = 1.0 / np.diag(np.linalg.inv(gram)).real
    per_user = np.log1p((snr / len(picked)) * gains)
    return SelectionOutcome(picked, float(sums[0]), per_user)


def r_zf_k_mc(n_tx: int, snr: float, n_users: int, blocks: int, seed: int = 0,
              chunk: int = _CHUNK) -> McEstimate:
    """Per-served-user perfect-CSIT rate with greedy selection from K users.

    Defined as E[selected sum rate] / N_t so that multiplying back by N_t
    gives the sum spectral efficiency.
    """
    rng = np.random.default_rng(seed)
    vals = np.empty(blocks)
    done = 0
    while done < blocks:
        n = min(chunk, blocks - done)
        channels = draw_channels(n, n_users, n_tx, rng)
        sums, _ = zf_selection_sum_rate(channels, n_tx, snr)
        vals[done:done + n] = sums / n_tx
        done += n
    return McEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(blocks)), blocks)


class RzfCache:
    """File-backed cache of the per-K selection rates (written once, read many)."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._table: dict[str, dict] = {}
        if self.path is not None and self.path.exists():
            self._table = json.loads(self.path.read_text())

    @staticmethod
    def _key(n_tx: int, snr: float, n_users: int, blocks: int, seed: int) -> str:
        return f"nt{n_tx}_snr{snr:.6g}_K{n_users}_b{blocks}_s{seed}"

    def get_or_compute(self, n_tx: int, snr: float, n_users: int, blocks: int,
                       seed: int = 0) -> McEstimate:
        key = self._key(n_tx, snr, n_users, blocks, seed)
        with self._lock:
            hit = self._table.get(key)
        if hit is not None:
            return McEstimate(hit["mean"], hit["stderr"], hit["blocks"])
        est = r_zf_k_mc(n_tx, snr, n_users, blocks, seed)
        with self._lock:
            self._table[key] = {"mean": est.mean, "stderr": est.stderr, "blocks": est.blocks}
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self.path.write_text(json.dumps(self._table, indent=1, sort_keys=True))
        return est


# ---------------------------------------------------------------------------
# many-user downlink efficiency and the joint (K, T_fb) tradeoff


def w_of_tfb_users(config: SystemConfig, t_fb: float, n_users: int, r_zf_k: float,
                   scheme: FeedbackScheme | None = None) -> float:
    """Sum net spectral efficiency (nats/use) with K users feeding back.

    `r_zf_k` is the per-served-user selection rate from the MC cache. The
    feedback loss exponent spreads T_fb over the K reporting users; uncoded
    QAM additionally pays its message error probability per user.
    """
    n_tx, snr = config.n_tx, config.snr
    if scheme is None or scheme.kind is SchemeKind.DIGITAL_ERROR_FREE:
        loss = snr * math.exp(-t_fb / (n_users * (n_tx - 1)) * math.log1p(snr))
        factor = 1.0
    elif scheme.kind is SchemeKind.DIGITAL_QAM:
        loss = snr * math.exp(-t_fb / (n_users * (n_tx - 1)) * math.log(scheme.qam_order))
        factor = 1.0 - qam_message_error(scheme.qam_order, snr, t_fb * n_tx / n_users, n_tx)
    else:
        raise ValueError("many-user analysis models digital feedback")
    opt = w_of_tfb(config, scheme or FeedbackScheme(SchemeKind.DIGITAL_ERROR_FREE),
                   t_fb, r_zf=r_zf_k, n_gap=loss)
    return n_tx * opt.value * factor


def users_tradeoff_curve(config: SystemConfig, rzf_by_k: dict[int, float],
                         t_fb_grid, scheme: FeedbackScheme | None = None):
    """Per-feedback-spend best user count: rows (t_fb, K*, R_down, R_up) in bit/s."""
    rows = []
    for t_fb in t_fb_grid:
        best_k, best_w = None, -math.inf
        for k, r_k in sorted(rzf_by_k.items()):
            w = w_of_tfb_users(config, t_fb, k, r_k, scheme)
            if w > best_w:
                best_k, best_w = k, w
        rows.append((t_fb, best_k,
                     downlink_rate_bps(config, best_w / config.n_tx),
                     uplink_rate_bps(config, t_fb)))
    return rows


def pareto_with_users(config: SystemConfig, rzf_by_k: dict[int, float],
                      lam: float = 0.5, t_fb_grid=None,
                      scheme: FeedbackScheme | None = None):
    """Joint (K, T_fb) maximizer of the weighted uplink/downlink rate sum.

    Returns (K*, t_fb*, R_down, R_up) with rates in bit/s.
    """
    if t_fb_grid is None:
        t_fb_grid = range(1, int(max(1.0, min(config.block_len,
                                              config.uplink_bw * config.coherence_time))))
    best = None
    for t_fb in t_fb_grid:
        for k, r_k in sorted(rzf_by_k.items()):
            w = w_of_tfb_users(config, float(t_fb), k, r_k, scheme)
            r_down = downlink_rate_bps(config, w / config.n_tx)
            r_up = uplink_rate_bps(config, float(t_fb))
            value = lam * r_down + (1.0 - lam) * r_up
            if best is None or value > best[0]:
                best = (value, k, float(t_fb), r_down, r_up)
    _, k_star, t_fb_star, r_down, r_up = best
    return k_star, t_fb_star, r_down, r_up


# ---------------------------------------------------------------------------
# experiment summaries


def config_hash(obj) -> str:
    """Stable short hash of a dataclass or plain dict of parameters."""
    try:
        payload = asdict(obj)
    except TypeError:
        payload = dict(obj)
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


def append_summary(path: str | Path, record: dict) -> None:
    """Append one JSON-lines record of an MC experiment summary."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
