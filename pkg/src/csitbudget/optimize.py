"""Joint optimization of training and feedback lengths inside one block.

The net rate (1 - (T_tr+T_fb)/T)(R_zf - ln(1+g)) is maximized in two steps:
an inner closed-form split of the total overhead T_t (KKT conditions) and a
concave outer search over T_t. The outer search uses bisection on the
closed-form gradient where one exists (TDD, analog) and a coarse scan plus
golden-section refinement otherwise (digital, QAM).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import FeedbackScheme, ResourceSplit, SchemeKind, digital_qam
from .rates import (
    gap_g,
    net_spectral_efficiency,
    qam_message_error,
    rate_gap,
    zf_rate_perfect_csit,
)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_TOL = 1e-6


@dataclass
class OptimizationResult:
    scheme: FeedbackScheme
    split: ResourceSplit
    net_rate: float                      # nats per channel use per user
    upper_bound_split: ResourceSplit     # analytic T-tilde bounds
    effective_gap_bound: float           # 2 sqrt(theta R / T)
    lagrange_mu: float | None = None
    iterations: int = 0
    at_boundary: bool = False


def effective_gap_bound(theta: float, r_zf: float, t_block: float) -> float:
    """Upper bound 2 sqrt(theta R_zf / T) on the optimized gap to perfect CSIT."""
    return 2.0 * math.sqrt(theta * r_zf / t_block)


def net_rate_for_split(config, scheme: FeedbackScheme, split: ResourceSplit) -> float:
    """Net per-user rate of an explicit split; the one evaluator every solver,
    oracle and rounding step shares. QAM includes the (1 - P_e,fb) outage factor."""
    g = gap_g(scheme, split, config.snr, config.n_tx)
    r_zf = zf_rate_perfect_csit(config.n_tx, config.snr)
    net = net_spectral_efficiency(r_zf, rate_gap(g), split.t_total, config.block_len)
    if scheme.kind is SchemeKind.DIGITAL_QAM:
        net *= 1.0 - qam_message_error(scheme.qam_order, config.snr, split.t_fb, config.n_tx)
    return net


def _bisect_gradient_max(grad, lo: float, hi: float, tol: float = _TOL):
    """Arg max of a concave function on [lo, hi] given its gradient."""
    iters = 0
    if grad(lo) <= 0:
        return lo, iters
    if grad(hi) >= 0:
        return hi, iters
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if grad(mid) > 0:
            lo = mid
        else:
            hi = mid
        iters += 1
    return 0.5 * (lo + hi), iters


def golden_section_max(fn, lo: float, hi: float, tol: float = _TOL):
    """Arg max of a unimodal function on [lo, hi] by golden-section search."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    iters = 0
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = fn(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = fn(x2)
        iters += 1
    x = x1 if f1 >= f2 else x2
    return x, iters


def scan_then_golden_max(fn, lo: float, hi: float, points: int = 96, tol: float = _TOL):
    """Coarse grid scan to bracket the mode, then golden-section refinement.

    Robust against the mild non-unimodality the QAM outage factor can induce.
    """
    if hi <= lo:
        return lo, 0
    step = (hi - lo) / (points - 1)
    best_i, best_v = 0, -math.inf
    for i in range(points):
        v = fn(min(hi, lo + i * step))
        if v > best_v:
            best_i, best_v = i, v
    blo = min(hi, lo + max(0, best_i - 1) * step)
    bhi = min(hi, lo + (best_i + 1) * step)
    x, iters = golden_section_max(fn, blo, bhi, tol)
    return x, iters + points


def _tdd_objective(r_zf: float, theta: float, t_block: float):
    def f(x: float) -> float:
        return (1.0 - x / t_block) * max(0.0, r_zf - math.log1p(theta / x))

    def grad(x: float) -> float:
        return (theta * (1.0 - x / t_block) / (x * x + theta * x)
                - (r_zf - math.log1p(theta / x)) / t_block)

    return f, grad


def optimize_tdd(config, scheme: FeedbackScheme | None = None) -> OptimizationResult:
    """Optimal uplink training length for open-loop TDD with reciprocity."""
    if scheme is None:
        scheme = FeedbackScheme(SchemeKind.TDD_OPEN_LOOP)
    if scheme.kind is not SchemeKind.TDD_OPEN_LOOP:
        raise ValueError("optimize_tdd expects the open-loop TDD scheme")
    t_block = config.block_len
    if t_block < config.n_tx:
        raise ValueError("block too short to train the array")
    theta = scheme.training_weight(config.n_tx)
    r_zf = zf_rate_perfect_csit(config.n_tx, config.snr)
    f, grad = _tdd_objective(r_zf, theta, t_block)
    x, iters = _bisect_gradient_max(grad, float(config.n_tx), t_block)
    t_tilde = math.sqrt(theta * t_block / r_zf)
    return OptimizationResult(
        scheme=scheme,
        split=ResourceSplit(x, 0.0),
        net_rate=f(x),
        upper_bound_split=ResourceSplit(t_tilde, 0.0),
        effective_gap_bound=effective_gap_bound(theta, r_zf, t_block),
        lagrange_mu=None,
        iterations=iters,
    )


def inner_allocate_analog(theta_tr: float, theta_fb: float, t_total: float) -> ResourceSplit:
    """KKT split of a total budget for the analog gap theta_tr/T_tr + theta_fb/T_fb."""
    if t_total <= 0:
        raise ValueError("t_total must be positive")
    if theta_tr <= 0 or theta_fb < 0:
        raise ValueError("invalid weights")
    if theta_fb == 0:
        return ResourceSplit(t_total, 0.0)
    cal_k = (math.sqrt(theta_tr) + math.sqrt(theta_fb)) ** 2
    return ResourceSplit(math.sqrt(theta_tr / cal_k) * t_total,
                         math.sqrt(theta_fb / cal_k) * t_total)


def optimize_analog(config, scheme: FeedbackScheme | None = None) -> OptimizationResult:
    """Joint training/feedback optimum for analog (unquantized) feedback."""
    if scheme is None:
        scheme = FeedbackScheme(SchemeKind.ANALOG)
    if scheme.kind is not SchemeKind.ANALOG:
        raise ValueError("optimize_analog expects the analog scheme")
    t_block = config.block_len
    theta_tr = scheme.training_weight(config.n_tx)
    theta_fb = scheme.feedback_weight(config.n_tx)
    cal_k = (math.sqrt(theta_tr) + math.sqrt(theta_fb)) ** 2
    # keep the inner split's training component above the identifiability floor
    lo = config.n_tx * math.sqrt(cal_k / theta_tr)
    if t_block <= lo:
        raise ValueError("block too short for analog training plus feedback")
    r_zf = zf_rate_perfect_csit(config.n_tx, config.snr)
    f, grad = _tdd_objective(r_zf, cal_k, t_block)
    t_total, iters = _bisect_gradient_max(grad, lo, t_block)
    split = inner_allocate_analog(theta_tr, theta_fb, t_total)
    t_tilde = math.sqrt(cal_k * t_block / r_zf)
    ub = inner_allocate_analog(theta_tr, theta_fb, t_tilde)
    return OptimizationResult(
        scheme=scheme,
        split=split,
        net_rate=f(t_total),
        upper_bound_split=ub,
        effective_gap_bound=effective_gap_bound(cal_k, r_zf, t_block),
        lagrange_mu=t_total / (math.sqrt(theta_tr) + math.sqrt(theta_fb)),
        iterations=iters,
    )


def _digital_tfb_of_mu(mu: float, n_tx: int, snr: float) -> float:
    c1 = n_tx * (n_tx - 1) / math.log1p(snr)
    c2 = math.log(snr * math.log1p(snr) / (n_tx * (n_tx - 1)))
    return c1 * (2.0 * math.log(mu) + c2)


def inner_allocate_digital(n_tx: int, snr: float, t_total: float):
    """KKT split for the error-free digital gap; returns (split, mu, at_boundary).

    T_tr grows linearly in the multiplier mu while T_fb only grows as
    O(ln mu); when the stationary T_fb would be negative the allocation is
    clamped to the (t_total, 0) boundary and flagged.
    """
    if t_total <= 0:
        raise ValueError("t_total must be positive")
    sqrt_th = math.sqrt(n_tx - 1.0)
    mu0 = math.sqrt(n_tx * (n_tx - 1) / (snr * math.log1p(snr)))  # T_fb(mu0) = 0
    if t_total <= sqrt_th * mu0:
        return ResourceSplit(t_total, 0.0), t_total / sqrt_th, True

    def total(mu: float) -> float:
        return sqrt_th * mu + _digital_tfb_of_mu(mu, n_tx, snr)

    lo, hi = mu0, mu0 * 2.0
    while total(hi) < t_total:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < t_total:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * hi:
            break
    mu = 0.5 * (lo + hi)
    t_tr = sqrt_th * mu
    return ResourceSplit(t_tr, t_total - t_tr), mu, False


def optimize_digital_errorfree(config, scheme: FeedbackScheme | None = None) -> OptimizationResult:
    """Joint optimum for quantized feedback received error-free at uplink capacity."""
    if scheme is None:
        scheme = FeedbackScheme(SchemeKind.DIGITAL_ERROR_FREE)
    if scheme.kind is not SchemeKind.DIGITAL_ERROR_FREE:
        raise ValueError("optimize_digital_errorfree expects the error-free digital scheme")
    t_block = config.block_len
    n_tx, snr = config.n_tx, config.snr
    if t_block <= n_tx:
        raise ValueError("block too short")
    r_zf = zf_rate_perfect_csit(n_tx, snr)

    state = {}

    def outer(t_total: float) -> float:
        split, mu, boundary = inner_allocate_digital(n_tx, snr, t_total)
        if split.t_tr < n_tx:  # enforce the identifiability floor
            split = ResourceSplit(float(n_tx), max(0.0, t_total - n_tx))
        net = net_rate_for_split(config, scheme, split)
        state[t_total] = (split, mu, boundary)
        return net

    t_total, iters = scan_then_golden_max(outer, float(n_tx), t_block)
    net = outer(t_total)
    split, mu, boundary = state[t_total]
    t_tr_bound = math.sqrt((n_tx - 1) * t_block / r_zf)
    tfb_at_bound = max(0.0, _digital_tfb_of_mu(t_tr_bound / math.sqrt(n_tx - 1.0), n_tx, snr))
    return OptimizationResult(
        scheme=scheme,
        split=split,
        net_rate=net,
        upper_bound_split=ResourceSplit(t_tr_bound, tfb_at_bound),
        effective_gap_bound=effective_gap_bound(n_tx - 1.0, r_zf, t_block),
        lagrange_mu=mu,
        iterations=iters,
        at_boundary=boundary,
    )


_QAM_ORDERS = (4, 16, 64, 256)


def optimize_digital_qam(config, scheme: FeedbackScheme | None = None,
                         orders: tuple[int, ...] | None = None) -> OptimizationResult:
    """Joint optimum for uncoded QAM feedback, constellation size included.

    For each candidate M the effective rate loss (gap weighted by the message
    error probability) is minimized over the split of every total budget; the
    best (M, split) wins. A fixed `fb_bits` pins T_fb = B N_t / log2 M and
    restricts the search to the scheme's own constellation.
    """
    if scheme is None:
        scheme = digital_qam()
    if scheme.kind is not SchemeKind.DIGITAL_QAM:
        raise ValueError("optimize_digital_qam expects the QAM scheme")
    t_block = config.block_len
    n_tx = config.n_tx
    if t_block <= n_tx:
        raise ValueError("block too short")
    if orders is None:
        orders = (scheme.qam_order,) if scheme.fb_bits is not None else _QAM_ORDERS

    best = None
    total_iters = 0
    for order in orders:
        cand = FeedbackScheme(SchemeKind.DIGITAL_QAM, qam_order=order,
                              theta_tr=scheme.theta_tr, theta_fb=scheme.theta_fb)

        def inner_at(t_tr: float, t_fb: float, _cand=cand) -> float:
            return net_rate_for_split(config, _cand, ResourceSplit(t_tr, t_fb))

        if scheme.fb_bits is not None:
            t_fb = scheme.fb_bits * n_tx / math.log2(order)
            if t_fb >= t_block - n_tx:
                continue
            t_tr, iters = scan_then_golden_max(lambda x: inner_at(x, t_fb), float(n_tx), t_block - t_fb)
            net, split = inner_at(t_tr, t_fb), ResourceSplit(t_tr, t_fb)
        else:

            def best_over_split(t_total: float) -> tuple[float, float]:
                if t_total <= n_tx:
                    return float(n_tx), 0.0
                t_tr, _ = scan_then_golden_max(lambda x: inner_at(x, t_total - x),
                                               float(n_tx), t_total, points=64)
                return t_tr, inner_at(t_tr, t_total - t_tr)

            t_total, iters = scan_then_golden_max(lambda tt: best_over_split(tt)[1],
                                                  float(n_tx), t_block)
            t_tr, net = best_over_split(t_total)
            split = ResourceSplit(t_tr, t_total - t_tr)
        total_iters += iters
        if best is None or net > best[0]:
            best = (net, split, cand)

    if best is None:
        raise ValueError("no feasible QAM configuration for this block")
    net, split, cand = best
    r_zf = zf_rate_perfect_csit(n_tx, config.snr)
    t_tr_bound = math.sqrt((n_tx - 1) * t_block / r_zf)
    return OptimizationResult(
        scheme=cand,
        split=split,
        net_rate=net,
        upper_bound_split=ResourceSplit(t_tr_bound, max(0.0, split.t_fb)),
        effective_gap_bound=effective_gap_bound(n_tx - 1.0, r_zf, t_block),
        lagrange_mu=None,
        iterations=total_iters,
    )


def optimize_scheme(config, scheme: FeedbackScheme) -> OptimizationResult:
    """Dispatch to the solver matching the scheme kind."""
    if scheme.kind is SchemeKind.TDD_OPEN_LOOP:
        return optimize_tdd(config, scheme)
    if scheme.kind is SchemeKind.ANALOG:
        return optimize_analog(config, scheme)
    if scheme.kind is SchemeKind.DIGITAL_ERROR_FREE:
        return optimize_digital_errorfree(config, scheme)
    return optimize_digital_qam(config, scheme)


def round_split(config, scheme: FeedbackScheme, split: ResourceSplit) -> tuple[ResourceSplit, float]:
    """Integer split for reporting: evaluate floor/ceil neighbors, keep the best."""
    n_tx, t_block = config.n_tx, config.block_len
    cands_tr = {math.floor(split.t_tr), math.ceil(split.t_tr)}
    if scheme.kind is SchemeKind.TDD_OPEN_LOOP:
        cands_fb = {0}
    else:
        cands_fb = {math.floor(split.t_fb), math.ceil(split.t_fb)}
    best = None
    for t_tr in cands_tr:
        for t_fb in cands_fb:
            if t_tr < n_tx or t_fb < 0 or t_tr + t_fb > t_block:
                continue
            if scheme.kind is SchemeKind.ANALOG and t_fb == 0:
                continue
            cand = ResourceSplit(float(t_tr), float(t_fb))
            value = net_rate_for_split(config, scheme, cand)
            if best is None or value > best[1]:
                best = (cand, value)
    if best is None:
        raise ValueError("no feasible integer neighbor")
    return best
