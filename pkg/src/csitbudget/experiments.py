"""Batch experiment driver: figure reproduction as CSV plus rendered PNGs.

Every registered experiment writes one CSV (the regression contract: LF
endings, '.' decimals, header row, byte-identical for a given seed), one
JSON sidecar (config, seed, version, wall clock) and one PNG rendering.
Monte Carlo experiments share a per-K selection-rate cache inside the
output directory and log their raw estimates to a JSON-lines file.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    LN2,
    FeedbackScheme,
    SystemConfig,
    analog,
    digital_error_free,
    digital_qam,
    tdd_open_loop,
)
from .doppler import DopplerModel, delayed_pareto, rate_vs_speed
from .montecarlo import (
    AnalogCsit,
    MmseCsit,
    PerfectCsit,
    RvqCsit,
    RzfCache,
    append_summary,
    config_hash,
    ergodic_rate_mc,
    mmse_estimate,
    rate_lower_bound,
    rvq_distortion_sample,
    users_tradeoff_curve,
    w_of_tfb_users,
    zf_rate_perfect_csit,
)
from .optimize import (
    optimize_analog,
    optimize_digital_errorfree,
    optimize_digital_qam,
    optimize_tdd,
    round_split,
)
from .tradeoff import pareto_boundary, tfb_of_lambda, w_of_tfb

THREADS_ENV = "CSITBUDGET_THREADS"


def worker_count() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _pmap(fn, items):
    """Order-preserving parallel map over independent sweep cells."""
    workers = worker_count()
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"csitbudget-{__version__}+{out.stdout.strip()}"
    except OSError:
        pass
    return f"csitbudget-{__version__}"


@dataclass
class ExperimentSpec:
    """One registered figure experiment plus its sweep and seeding."""

    name: str
    config: SystemConfig = field(default_factory=SystemConfig)
    seed: int = 1234
    out_dir: Path = Path("results")
    mc_blocks: int = 100_000
    grid: list | None = None     # override of the default sweep grid

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.name not in EXPERIMENTS:
            raise KeyError(f"unknown figure '{self.name}'; see `csitbudget list`")
        if self.grid is not None and (len(self.grid) == 0
                                      or any(b <= a for a, b in zip(self.grid, self.grid[1:]))):
            raise ValueError("sweep grid must be nonempty and strictly increasing")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return repr(float(value))


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", newline="\n")


# ---------------------------------------------------------------------------
# figure experiments


def _block_grid(spec: ExperimentSpec) -> list[int]:
    if spec.grid is not None:
        return [int(t) for t in spec.grid]
    grid = np.unique(np.rint(np.geomspace(50, 2000, 25)).astype(int))
    return [int(t) for t in grid]


def _lambda_grid(spec: ExperimentSpec) -> list[float]:
    if spec.grid is not None:
        return [float(x) for x in spec.grid]
    return [round(x, 4) for x in np.linspace(0.02, 0.98, 33)]


def _cfg_at_block(config: SystemConfig, t: int) -> SystemConfig:
    return config.with_block_len(float(t))


def _optimizers(config: SystemConfig):
    return (
        ("tdd", lambda c: optimize_tdd(c)),
        ("analog", lambda c: optimize_analog(c)),
        ("digital", lambda c: optimize_digital_errorfree(c)),
        ("qam4", lambda c: optimize_digital_qam(c, digital_qam(4), orders=(4,))),
    )


def _scheme_of(name: str) -> FeedbackScheme:
    return {"tdd": tdd_open_loop(), "analog": analog(),
            "digital": digital_error_free(), "qam4": digital_qam(4)}[name]


def run_fig2(spec: ExperimentSpec):
    """Integer-optimal training/feedback lengths versus the block length."""
    header = ["T", "t_tr_tdd", "t_tr_analog", "t_fb_analog", "t_tr_digital",
              "t_fb_digital", "t_tr_qam4", "t_fb_qam4", "t_tr_rule"]

    def cell(t: int):
        cfg = _cfg_at_block(spec.config, t)
        row = [t]
        for name, opt in _optimizers(cfg):
            res = opt(cfg)
            split, _ = round_split(cfg, res.scheme, res.split)
            if name == "tdd":
                row.append(int(split.t_tr))
            else:
                row.extend([int(split.t_tr), int(split.t_fb)])
        rule = math.sqrt((cfg.n_tx - 1) * cfg.block_len
                         / zf_rate_perfect_csit(cfg.n_tx, cfg.snr))
        row.append(rule)
        return row

    return header, _pmap(cell, _block_grid(spec))


def run_fig3(spec: ExperimentSpec):
    """Sum spectral efficiency (bit/s/Hz) of the four schemes versus block length."""
    header = ["T", "se_tdd", "se_analog", "se_digital", "se_qam4"]

    def cell(t: int):
        cfg = _cfg_at_block(spec.config, t)
        row = [t]
        for _, opt in _optimizers(cfg):
            row.append(cfg.n_tx * opt(cfg).net_rate / LN2)
        return row

    return header, _pmap(cell, _block_grid(spec))


def run_fig4(spec: ExperimentSpec):
    """Model-2 downlink/uplink rate boundary (kbps) for three feedback schemes."""
    schemes = [("analog", analog()), ("digital", digital_error_free()), ("qam4", digital_qam(4))]
    header = ["lambda"]
    for name, _ in schemes:
        header += [f"t_fb_{name}", f"r_down_kbps_{name}", f"r_up_kbps_{name}"]

    grid = _lambda_grid(spec)
    columns = {}
    for name, scheme in schemes:
        pts = pareto_boundary(spec.config, scheme, grid, verify=False)
        pts.sort(key=lambda p: p.lam)
        columns[name] = pts
    rows = []
    for i, lam in enumerate(sorted(grid)):
        row = [lam]
        for name, _ in schemes:
            p = columns[name][i]
            row += [p.t_fb, p.r_down_bps / 1e3, p.r_up_bps / 1e3]
        rows.append(row)
    return header, rows


def run_fig5(spec: ExperimentSpec):
    """Feedback length versus the downlink weight lambda (closed form + numeric)."""
    from .tradeoff import numeric_tfb_of_lambda

    header = ["lambda", "t_fb_analog", "t_fb_analog_check",
              "t_fb_digital", "t_fb_digital_check"]

    def cell(lam: float):
        return [lam,
                tfb_of_lambda(spec.config, analog(), lam),
                numeric_tfb_of_lambda(spec.config, analog(), lam),
                tfb_of_lambda(spec.config, digital_error_free(), lam),
                numeric_tfb_of_lambda(spec.config, digital_error_free(), lam)]

    return header, _pmap(cell, _lambda_grid(spec))


_SPEEDS_KMH = (6.0, 50.0, 80.0)


def run_fig6(spec: ExperimentSpec):
    """Delayed-feedback rate boundary for three mobile speeds (digital feedback)."""
    header = ["lambda"]
    for v in _SPEEDS_KMH:
        header += [f"t_fb_v{v:g}", f"r_down_kbps_v{v:g}", f"r_up_kbps_v{v:g}"]
    grid = sorted(_lambda_grid(spec))
    per_speed = {}
    for v in _SPEEDS_KMH:
        model = DopplerModel.from_kmh(v, block_time=spec.config.block_time)
        pts = delayed_pareto(spec.config, model, digital_error_free(), grid)
        pts.sort(key=lambda p: p.lam)
        per_speed[v] = pts
    rows = []
    for i, lam in enumerate(grid):
        row = [lam]
        for v in _SPEEDS_KMH:
            p = per_speed[v][i]
            row += [p.t_fb, p.r_down_bps / 1e3, p.r_up_bps / 1e3]
        rows.append(row)
    return header, rows


def run_fig7(spec: ExperimentSpec):
    """Feedback length versus lambda under prediction, low and high speed."""
    speeds = (6.0, 80.0)
    header = ["lambda"]
    for v in speeds:
        header += [f"t_fb_analog_v{v:g}", f"t_fb_digital_v{v:g}"]
    grid = sorted(_lambda_grid(spec))
    rows = []
    from .doppler import _tfb_of_lambda_pred

    for lam in grid:
        row = [lam]
        for v in speeds:
            model = DopplerModel.from_kmh(v, block_time=spec.config.block_time)
            row += [_tfb_of_lambda_pred(spec.config, model, analog(), lam),
                    _tfb_of_lambda_pred(spec.config, model, digital_error_free(), lam)]
        rows.append(row)
    return header, rows


def run_fig8(spec: ExperimentSpec):
    """Downlink sum rate (kbps) versus mobile speed at a fixed feedback spend."""
    speeds = spec.grid if spec.grid is not None else \
        [1, 3, 6, 10, 15, 20, 30, 40, 50, 60, 70, 80, 90, 100]
    t_fb = 30.0
    header = ["v_kmh", "rate_analog_kbps", "rate_digital_kbps", "rate_qam4_kbps"]
    series = {}
    for name, scheme in (("analog", analog()), ("digital", digital_error_free()),
                         ("qam4", digital_qam(4))):
        series[name] = rate_vs_speed(spec.config, scheme, t_fb, speeds)
    rows = []
    for i, v in enumerate(speeds):
        rows.append([v, series["analog"][i][1] / 1e3, series["digital"][i][1] / 1e3,
                     series["qam4"][i][1] / 1e3])
    return header, rows


def _rzf_table(spec: ExperimentSpec, k_max: int) -> dict[int, float]:
    cache = RzfCache(spec.out_dir / "rzf_cache.json")
    summaries = spec.out_dir / "mc_summaries.jsonl"

    def one(k: int) -> tuple[int, float]:
        est = cache.get_or_compute(spec.config.n_tx, spec.config.snr, k,
                                   spec.mc_blocks, seed=spec.seed + k)
        append_summary(summaries, {
            "kind": "r_zf_k", "config": config_hash(spec.config), "K": k,
            "seed": spec.seed + k, "estimate": est.mean, "stderr": est.stderr,
            "blocks": est.blocks,
        })
        return k, est.mean

    return dict(_pmap(one, list(range(4, k_max + 1))))


def run_fig9(spec: ExperimentSpec):
    """Sum spectral efficiency vs feedback symbols for K = 4..8 users, T = 500."""
    cfg = spec.config.with_block_len(500.0) if spec.config.block_len != 500 else spec.config
    spec500 = replace_config(spec, cfg)
    table = _rzf_table(spec500, 8)
    t_grid = spec.grid if spec.grid is not None else list(range(4, 101))
    header = ["t_fb"] + [f"se_K{k}" for k in sorted(table)] + ["K_opt"]

    def cell(t_fb):
        ws = {k: w_of_tfb_users(cfg, float(t_fb), k, table[k]) / LN2 for k in sorted(table)}
        k_opt = max(ws, key=ws.get)
        return [t_fb] + [ws[k] for k in sorted(table)] + [k_opt]

    return header, _pmap(cell, t_grid)


def run_fig10(spec: ExperimentSpec):
    """Same sweep with up to 31 users, ideal digital and 4-QAM feedback."""
    cfg = spec.config.with_block_len(500.0) if spec.config.block_len != 500 else spec.config
    table = _rzf_table(replace_config(spec, cfg), 31)
    t_grid = spec.grid if spec.grid is not None else list(range(4, 201, 2))
    header = ["t_fb", "K_opt_digital", "se_digital_best", "K_opt_qam4", "se_qam4_best"]
    qam = digital_qam(4)

    def cell(t_fb):
        dig = {k: w_of_tfb_users(cfg, float(t_fb), k, table[k]) for k in table}
        qam_w = {k: w_of_tfb_users(cfg, float(t_fb), k, table[k], qam) for k in table}
        kd = max(dig, key=dig.get)
        kq = max(qam_w, key=qam_w.get)
        return [t_fb, kd, dig[kd] / LN2, kq, qam_w[kq] / LN2]

    return header, _pmap(cell, t_grid)


def run_fig11(spec: ExperimentSpec):
    """Joint (K, T_fb) uplink/downlink tradeoff with the optimal user count."""
    table = _rzf_table(spec, 31)
    t_grid = spec.grid if spec.grid is not None else list(range(1, 200))
    rows = users_tradeoff_curve(spec.config, table, [float(t) for t in t_grid])
    header = ["t_fb", "K_opt", "r_down_kbps", "r_up_kbps"]
    out = [[int(t), k, down / 1e3, up / 1e3] for t, k, down, up in rows]
    return header, out


def replace_config(spec: ExperimentSpec, cfg: SystemConfig) -> ExperimentSpec:
    clone = ExperimentSpec(name=spec.name, config=cfg, seed=spec.seed,
                           out_dir=spec.out_dir, mc_blocks=spec.mc_blocks, grid=spec.grid)
    return clone


EXPERIMENTS = {
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "fig6": run_fig6,
    "fig7": run_fig7,
    "fig8": run_fig8,
    "fig9": run_fig9,
    "fig10": run_fig10,
    "fig11": run_fig11,
}


def run_experiment(spec: ExperimentSpec, plot: bool = True) -> Path:
    """Execute one experiment: CSV + JSON sidecar (+ PNG). Returns the CSV path."""
    runner = EXPERIMENTS[spec.name]
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    start = time.time()
    header, rows = runner(spec)
    csv_path = spec.out_dir / f"{spec.name}.csv"
    write_csv(csv_path, header, rows)
    sidecar = {
        "figure": spec.name,
        "config": {
            "n_tx": spec.config.n_tx, "n_users": spec.config.n_users,
            "snr": spec.config.snr, "snr_db": spec.config.snr_db,
            "block_len": spec.config.block_len,
            "coherence_time": spec.config.coherence_time,
            "coherence_bw": spec.config.coherence_bw,
            "uplink_bw": spec.config.uplink_bw,
            "uplink_eff_bits": spec.config.uplink_eff_bits,
        },
        "seed": spec.seed,
        "mc_blocks": spec.mc_blocks,
        "version": version_string(),
        "wall_clock_s": round(time.time() - start, 3),
    }
    (spec.out_dir / f"{spec.name}.json").write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
    if plot:
        from .figures import render_figure

        render_figure(spec.name, header, rows, spec.out_dir / f"{spec.name}.png")
    return csv_path


# ---------------------------------------------------------------------------
# validation suite


def _check(name: str, passed: bool, margin: float, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "margin": float(margin), "detail": detail}


def validate_bounds(config: SystemConfig | None = None, quick: bool = False,
                    seed: int = 77) -> dict:
    """Machine-checkable validation: lower bounds, estimation and quantization.

    Includes a forced-failure self-test (a bound inflated by 1 nat must be
    flagged) so a silently-passing harness is itself detectable.
    """
    cfg = config or SystemConfig()
    blocks = 20_000 if quick else 100_000
    checks = []

    # lower-bound validity for each simulated CSIT chain
    cells = [(MmseCsit(16.0), "mmse_t16"), (MmseCsit(40.0), "mmse_t40"),
             (AnalogCsit(16.0, 16.0), "analog_16_16"), (AnalogCsit(40.0, 40.0), "analog_40_40"),
             (RvqCsit(40.0, 40 * math.log2(1 + cfg.snr) / cfg.n_tx), "rvq_t40_cap")]
    for src, name in cells:
        est = ergodic_rate_mc(cfg, src, blocks, seed=seed)
        bound = rate_lower_bound(cfg, src)
        margin = est.mean - bound
        checks.append(_check(f"lower_bound_{name}", margin >= -3 * est.stderr, margin,
                             f"mc={est.mean:.5f}±{est.stderr:.5f} bound={bound:.5f}"))

    # estimation error variance against the closed form
    rng = np.random.default_rng(seed + 1)
    n = blocks // 4
    h = (rng.standard_normal((n, cfg.n_tx)) + 1j * rng.standard_normal((n, cfg.n_tx))) / math.sqrt(2)
    for t_tr in (8.0, 40.0):
        est, var = mmse_estimate(h, t_tr, cfg.snr, cfg.n_tx, rng)
        err = np.abs(h - est) ** 2
        emp = float(err.mean())
        sigma = float(err.std(ddof=1) / math.sqrt(err.size))
        checks.append(_check(f"estimation_var_t{int(t_tr)}", abs(emp - var) <= 3 * sigma,
                             abs(emp - var), f"emp={emp:.6f} analytic={var:.6f} 3sig={3*sigma:.2e}"))

    # quantization distortion scaling ~ 2^{-B/(Nt-1)}
    rng = np.random.default_rng(seed + 2)
    ratios = []
    for bits in (6.0, 12.0):
        s = rvq_distortion_sample(bits, cfg.n_tx, rng, blocks)
        ratios.append(float(s.mean()) / 2.0 ** (-bits / (cfg.n_tx - 1)))
    ok = all(0.55 <= r <= 1.0 for r in ratios)
    checks.append(_check("rvq_distortion_scaling", ok, min(ratios),
                         f"measured/bound ratios {[round(r, 3) for r in ratios]}"))

    # closed-form perfect-CSIT rate against simulation
    est = ergodic_rate_mc(cfg, PerfectCsit(), blocks, seed=seed + 3)
    closed = zf_rate_perfect_csit(cfg.n_tx, cfg.snr)
    checks.append(_check("zf_rate_closed_form", abs(est.mean - closed) <= 3 * est.stderr,
                         abs(est.mean - closed), f"mc={est.mean:.5f}±{est.stderr:.5f} closed={closed:.5f}"))

    # forced-failure self-test: an inflated bound must be reported as violated
    src = MmseCsit(40.0)
    est = ergodic_rate_mc(cfg, src, blocks // 2, seed=seed + 4)
    inflated = rate_lower_bound(cfg, src) + 1.0
    self_test_ok = est.mean - inflated < -3 * est.stderr  # violation detected
    checks.append(_check("self_test_inflated_bound_detected", self_test_ok,
                         est.mean - inflated, "harness sanity: inflating the bound by 1 nat must fail"))

    return {"checks": checks, "all_passed": all(c["passed"] for c in checks),
            "blocks": blocks, "seed": seed}
