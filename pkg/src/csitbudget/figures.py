"""Matplotlib rendering of experiment CSV data to PNG files.

Presentation only: the CSV stays the regression contract, these renderings
exist so a run of the CLI leaves a figure next to every table.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _columns(header, rows):
    cols = {name: [] for name in header}
    for row in rows:
        for name, value in zip(header, row):
            cols[name].append(value)
    return cols


def _line_plot(ax, cols, xkey, ykeys, xlabel, ylabel, logx=False):
    for key in ykeys:
        ax.plot(cols[xkey], cols[key], marker=".", markersize=3, label=key)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)


def render_figure(name: str, header: list[str], rows: list[list], out_png: Path) -> Path:
    """Render one experiment's table; dispatches on the figure name."""
    cols = _columns(header, rows)
    fig, ax = plt.subplots(figsize=(7, 4.5), dpi=130)

    if name == "fig2":
        keys = [k for k in header if k.startswith(("t_tr", "t_fb"))]
        _line_plot(ax, cols, "T", keys, "block length T (channel uses)",
                   "training / feedback symbols", logx=True)
    elif name == "fig3":
        _line_plot(ax, cols, "T", [k for k in header if k.startswith("se_")],
                   "block length T (channel uses)", "sum spectral efficiency (bit/s/Hz)",
                   logx=True)
    elif name in ("fig4", "fig6"):
        down = [k for k in header if k.startswith("r_down")]
        up = [k for k in header if k.startswith("r_up")]
        for dk, uk in zip(down, up):
            ax.plot(cols[dk], cols[uk], marker=".", markersize=3,
                    label=dk.replace("r_down_kbps_", ""))
        ax.set_xlabel("downlink rate (kbps)")
        ax.set_ylabel("uplink rate (kbps)")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    elif name in ("fig5", "fig7"):
        _line_plot(ax, cols, "lambda", [k for k in header if k.startswith("t_fb")],
                   "downlink weight lambda", "feedback symbols per block")
    elif name == "fig8":
        _line_plot(ax, cols, "v_kmh", [k for k in header if k.startswith("rate_")],
                   "mobile speed (km/h)", "downlink sum rate (kbps)")
    elif name == "fig9":
        _line_plot(ax, cols, "t_fb", [k for k in header if k.startswith("se_K")],
                   "feedback symbols per block", "sum spectral efficiency (bit/s/Hz)")
    elif name == "fig10":
        _line_plot(ax, cols, "t_fb", ["se_digital_best", "se_qam4_best"],
                   "feedback symbols per block", "sum spectral efficiency (bit/s/Hz)")
    elif name == "fig11":
        ax.plot(cols["r_down_kbps"], cols["r_up_kbps"], marker=".", markersize=3)
        ax.set_xlabel("downlink rate (kbps)")
        ax.set_ylabel("uplink rate (kbps)")
        ax.grid(True, alpha=0.3)
    else:
        _line_plot(ax, cols, header[0], header[1:], header[0], "value")

    ax.set_title(name)
    fig.tight_layout()
    fig.savefig(out_png)
    plt.close(fig)
    return out_png
