"""Joint training/feedback optimizers against brute-force grid oracles."""

import math

import pytest

from csitbudget import (
    ResourceSplit,
    SystemConfig,
    analog,
    digital_error_free,
    digital_qam,
    effective_gap_bound,
    inner_allocate_analog,
    inner_allocate_digital,
    net_rate_for_split,
    optimize_analog,
    optimize_digital_errorfree,
    optimize_digital_qam,
    optimize_scheme,
    optimize_tdd,
    round_split,
    tdd_open_loop,
    zf_rate_perfect_csit,
)


def cfg_at(t_block: float, snr: float = 10.0) -> SystemConfig:
    return SystemConfig(snr=snr, block_len=t_block, coherence_time=t_block / 200e3)


def brute_force(cfg, scheme, needs_fb: bool):
    """Integer grid argmax of the net rate over all feasible splits."""
    best = (-1.0, None)
    t_block = int(cfg.block_len)
    lo_fb = 1 if needs_fb else 0
    for t_tr in range(cfg.n_tx, t_block + 1):
        for t_fb in range(lo_fb, t_block - t_tr + 1):
            value = net_rate_for_split(cfg, scheme, ResourceSplit(float(t_tr), float(t_fb)))
            if value > best[0]:
                best = (value, (t_tr, t_fb))
    return best


class TestTdd:
    def test_default_block(self, cfg):
        res = optimize_tdd(cfg)
        split, _ = round_split(cfg, res.scheme, res.split)
        assert abs(split.t_tr - 24) <= 1  # paper reports 24; exact integer optimum is 23
        assert res.upper_bound_split.t_tr == pytest.approx(
            math.sqrt(3 * 200 / zf_rate_perfect_csit(4, 10.0)), rel=1e-12)
        assert res.upper_bound_split.t_tr == pytest.approx(23.93, abs=0.01)

    def test_matches_brute_force(self, cfg):
        res = optimize_tdd(cfg)
        value, (t_tr, _) = brute_force(cfg, tdd_open_loop(), needs_fb=False)
        split, rounded_value = round_split(cfg, res.scheme, res.split)
        assert rounded_value == pytest.approx(value, abs=1e-12)
        assert abs(split.t_tr - t_tr) <= 1

    def test_sqrt_scaling(self):
        t200 = optimize_tdd(cfg_at(200.0)).split.t_tr
        t800 = optimize_tdd(cfg_at(800.0)).split.t_tr
        assert t800 / t200 == pytest.approx(2.0, rel=0.05)

    def test_infeasible_block(self):
        with pytest.raises(ValueError):
            optimize_tdd(SystemConfig(block_len=3.0, coherence_time=3 / 200e3))

    def test_upper_bound_property(self, cfg):
        res = optimize_tdd(cfg)
        assert res.split.t_tr <= res.upper_bound_split.t_tr + 1.0


class TestInnerAllocateAnalog:
    def test_default_weights(self):
        split = inner_allocate_analog(3.0, 12.0, 30.0)
        assert split.t_tr == pytest.approx(10.0, rel=1e-12)
        assert split.t_fb == pytest.approx(20.0, rel=1e-12)

    def test_degenerate_tdd(self):
        split = inner_allocate_analog(3.0, 0.0, 30.0)
        assert (split.t_tr, split.t_fb) == (30.0, 0.0)

    def test_symmetry(self):
        split = inner_allocate_analog(3.0, 3.0, 10.0)
        assert split.t_tr == pytest.approx(5.0)
        assert split.t_fb == pytest.approx(5.0)

    def test_grid_oracle(self):
        # 1-D search over the same budget must not find a lower gap value
        split = inner_allocate_analog(3.0, 12.0, 30.0)
        g_kkt = 3.0 / split.t_tr + 12.0 / split.t_fb
        grid = [3.0 / t + 12.0 / (30.0 - t) for t in
                [0.01 * i for i in range(1, 3000)]]
        assert g_kkt <= min(grid) + 1e-9


class TestAnalog:
    def test_bounds_and_split(self, cfg):
        res = optimize_analog(cfg)
        # analytic bound split matches sqrt(K T / R) partitioned 1:2
        assert res.upper_bound_split.t_tr == pytest.approx(23.93, abs=0.01)
        assert res.upper_bound_split.t_fb == pytest.approx(47.86, abs=0.01)
        assert res.split.t_tr <= res.upper_bound_split.t_tr + 1.0
        # inner split keeps the 1:2 KKT ratio
        assert res.split.t_fb / res.split.t_tr == pytest.approx(2.0, rel=1e-9)

    def test_matches_brute_force(self, cfg):
        res = optimize_analog(cfg)
        value, (t_tr, t_fb) = brute_force(cfg, analog(), needs_fb=True)
        split, rounded_value = round_split(cfg, res.scheme, res.split)
        assert rounded_value == pytest.approx(value, abs=1e-3)
        assert abs(split.t_tr - t_tr) <= 1 and abs(split.t_fb - t_fb) <= 1

    def test_training_near_tdd(self, cfg):
        # figure-level claim: training lengths nearly coincide across schemes;
        # the exact joint optima differ by ~2 symbols at T = 200
        t_tdd = optimize_tdd(cfg).split.t_tr
        t_analog = optimize_analog(cfg).split.t_tr
        assert abs(t_tdd - t_analog) <= 3.0

    def test_gap_to_perfect_bounded(self, cfg):
        res = optimize_analog(cfg)
        r_zf = zf_rate_perfect_csit(4, 10.0)
        assert r_zf - res.net_rate <= 2 * math.sqrt(27 * r_zf / 200)


class TestInnerAllocateDigital:
    def test_reference_budget(self):
        split, mu, boundary = inner_allocate_digital(4, 10.0, 52.5)
        assert not boundary
        assert split.t_total == pytest.approx(52.5, abs=1e-6)
        # oracle: fine grid minimization of the digital gap under the budget
        def g(t_tr):
            return 3.0 / t_tr + 10.0 * 11.0 ** (-(52.5 - t_tr) / 12.0)

        grid_t = min((g(4 + 0.001 * i), 4 + 0.001 * i) for i in range(int(48.5 / 0.001)))
        assert g(split.t_tr) <= grid_t[0] + 1e-10
        assert split.t_tr == pytest.approx(grid_t[1], abs=0.01)

    def test_logarithmic_feedback_growth(self):
        s1, _, _ = inner_allocate_digital(4, 10.0, 60.0)
        s2, _, _ = inner_allocate_digital(4, 10.0, 120.0)
        s3, _, _ = inner_allocate_digital(4, 10.0, 240.0)
        first = (s2.t_fb - s1.t_fb) / (s2.t_tr - s1.t_tr)
        second = (s3.t_fb - s2.t_fb) / (s3.t_tr - s2.t_tr)
        assert second < first < 0.25
        assert second < 0.1

    def test_boundary_clamp(self):
        split, _, boundary = inner_allocate_digital(4, 10.0, 1.0)
        assert boundary
        assert (split.t_tr, split.t_fb) == (1.0, 0.0)


class TestDigitalErrorFree:
    def test_matches_brute_force(self, cfg):
        res = optimize_digital_errorfree(cfg)
        value, (t_tr, t_fb) = brute_force(cfg, digital_error_free(), needs_fb=False)
        split, rounded_value = round_split(cfg, res.scheme, res.split)
        assert rounded_value == pytest.approx(value, abs=1e-3)
        assert abs(split.t_tr - t_tr) <= 1 and abs(split.t_fb - t_fb) <= 1

    def test_training_within_two_of_tdd(self, cfg):
        assert abs(optimize_digital_errorfree(cfg).split.t_tr
                   - optimize_tdd(cfg).split.t_tr) <= 2.0

    def test_between_tdd_and_analog(self, cfg):
        net = optimize_digital_errorfree(cfg).net_rate
        assert net <= optimize_tdd(cfg).net_rate
        assert net >= optimize_analog(cfg).net_rate


class TestDigitalQam:
    def test_matches_brute_force(self, cfg):
        res = optimize_digital_qam(cfg)
        value, (t_tr, t_fb) = brute_force(cfg, digital_qam(res.scheme.qam_order), needs_fb=False)
        split, rounded_value = round_split(cfg, res.scheme, res.split)
        assert rounded_value == pytest.approx(value, abs=1e-3)
        assert abs(split.t_tr - t_tr) <= 1 and abs(split.t_fb - t_fb) <= 1

    def test_picks_4qam_at_10db(self, cfg):
        assert optimize_digital_qam(cfg).scheme.qam_order == 4

    def test_error_prob_small_at_optimum(self, cfg):
        from csitbudget import qam_message_error

        res = optimize_digital_qam(cfg)
        p = qam_message_error(res.scheme.qam_order, cfg.snr, res.split.t_fb, cfg.n_tx)
        assert p <= 0.05

    def test_bracketed_by_errorfree_and_analog(self, cfg):
        net = optimize_digital_qam(cfg).net_rate
        assert net <= optimize_digital_errorfree(cfg).net_rate
        assert net >= optimize_analog(cfg).net_rate

    def test_fixed_bits_pins_feedback(self, cfg):
        res = optimize_digital_qam(cfg, digital_qam(4, fb_bits=25.0))
        assert res.split.t_fb == pytest.approx(50.0)


class TestEffectiveGapBound:
    def test_value(self):
        r_zf = zf_rate_perfect_csit(4, 10.0)
        assert effective_gap_bound(3.0, r_zf, 200.0) == pytest.approx(
            2 * math.sqrt(3 * r_zf / 200), rel=1e-12)
        assert effective_gap_bound(3.0, 1.04787, 200.0) == pytest.approx(0.2507, abs=2e-4)

    @pytest.mark.parametrize("t_block", [100.0, 200.0, 500.0, 1000.0])
    def test_dominates_realized_gap(self, t_block):
        c = cfg_at(t_block)
        res = optimize_tdd(c)
        r_zf = zf_rate_perfect_csit(4, 10.0)
        assert r_zf - res.net_rate <= res.effective_gap_bound

    def test_vanishes_with_block_length(self):
        assert effective_gap_bound(3.0, 1.0, 1e12) < 1e-5


class TestTwoStepEquivalence:
    @pytest.mark.parametrize("t_block", [100, 200, 300])
    @pytest.mark.parametrize("scheme,opt,needs_fb", [
        (tdd_open_loop(), optimize_tdd, False),
        (analog(), optimize_analog, True),
        (digital_error_free(), optimize_digital_errorfree, False),
        (digital_qam(4), lambda c: optimize_digital_qam(c, orders=(4,)), False),
    ], ids=["tdd", "analog", "digital", "qam4"])
    def test_two_step_equals_grid(self, t_block, scheme, opt, needs_fb):
        c = cfg_at(float(t_block))
        res = opt(c)
        grid_value, _ = brute_force(c, scheme, needs_fb)
        assert res.net_rate >= grid_value - 1e-3
        _, rounded_value = round_split(c, res.scheme, res.split)
        assert rounded_value == pytest.approx(grid_value, abs=1e-3)


class TestMonotonicityAndOrdering:
    def test_net_rate_monotone_in_block_length(self):
        for opt in (optimize_tdd, optimize_analog, optimize_digital_errorfree):
            nets = [opt(cfg_at(float(t))).net_rate for t in (100, 200, 500, 1000)]
            assert all(a <= b + 1e-12 for a, b in zip(nets, nets[1:]))

    def test_net_rate_monotone_in_snr(self):
        for opt in (optimize_tdd, optimize_analog, optimize_digital_errorfree,
                    optimize_digital_qam):
            nets = [opt(cfg_at(200.0, snr)).net_rate for snr in (1.0, 10.0, 100.0)]
            assert all(a <= b + 1e-12 for a, b in zip(nets, nets[1:]))

    @pytest.mark.parametrize("t_block", [100, 200, 500, 1000, 2000])
    def test_universal_ordering_legs(self, t_block):
        # TDD upper-bounds everything; errors only hurt digital feedback
        for snr in (1.0, 10.0, 100.0):
            c = cfg_at(float(t_block), snr)
            tdd = optimize_tdd(c).net_rate
            dig = optimize_digital_errorfree(c).net_rate
            qam = optimize_digital_qam(c).net_rate
            an = optimize_analog(c).net_rate
            assert tdd >= dig - 1e-9
            assert tdd >= an - 1e-9
            assert dig >= qam - 1e-9

    @pytest.mark.parametrize("t_block", [100, 200, 500, 1000, 2000])
    def test_qam_beats_analog_at_10db(self, t_block):
        # holds at the 10 dB operating point of the reference curves; fails
        # at 0 dB (uncoded QAM collapses) and marginally at 20 dB, T = 100
        c = cfg_at(float(t_block), 10.0)
        assert optimize_digital_qam(c).net_rate >= optimize_analog(c).net_rate - 1e-9

    def test_dispatch(self, cfg):
        for scheme in (tdd_open_loop(), analog(), digital_error_free(), digital_qam(4)):
            res = optimize_scheme(cfg, scheme)
            assert res.net_rate > 0
