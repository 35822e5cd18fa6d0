"""Static SVG figures for fit and simulation reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "reicoh"


def _save(fig, path, provenance):
    desc = "; ".join(f"{k}={provenance[k]}" for k in sorted(provenance))
    fig.savefig(path, format="svg", metadata={"Date": None, "Description": desc})
    plt.close(fig)


def plot_fit(path, x, y, sigma, x_fine, y_fine, xlabel, ylabel, title, provenance, logx=False):
    fig, (ax, axr) = plt.subplots(
        2, 1, figsize=(6, 5), sharex=True, gridspec_kw={"height_ratios": [3, 1]}
    )
    if sigma is not None:
        ax.errorbar(x, y, yerr=sigma, fmt="o", ms=3, color="k", lw=0.8, label="data")
    else:
        ax.plot(x, y, "o", ms=3, color="k", label="data")
    ax.plot(x_fine, y_fine, "-", color="tab:red", lw=1.2, label="fit")
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    ax.legend(frameon=False)
    y_at = np.interp(x, x_fine, y_fine)
    axr.axhline(0.0, color="0.6", lw=0.8)
    axr.plot(x, y - y_at, "o", ms=3, color="k")
    axr.set_xlabel(xlabel)
    axr.set_ylabel("residual")
    if logx:
        ax.set_xscale("log")
    fig.tight_layout()
    _save(fig, path, provenance)


def plot_echo(path, t_in, i_in, t_out, i_out, ts, window, provenance):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t_in, i_in * 1e-2, color="k", lw=1.0, label="input ×1e-2")
    ax.plot(t_out, i_out, color="tab:red", lw=1.0, label="output")
    ax.axvspan(window[0], window[1], color="tab:blue", alpha=0.08, label="echo window")
    ax.axvline(ts, color="tab:blue", ls=":", lw=0.8)
    ax.set_xlabel("time (µs)")
    ax.set_ylabel("intensity (input peak = 1)")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path, provenance)


def plot_efficiency(path, d, eta_num, eta_ana, title, provenance):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(d, np.asarray(eta_ana) * 100, "-", color="k", label="closed form")
    ax.plot(d, np.asarray(eta_num) * 100, "o", color="tab:red", ms=4, label="simulation")
    ax.set_xlabel("tooth optical depth d")
    ax.set_ylabel("efficiency (%)")
    ax.set_title(title, fontsize=10)
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path, provenance)
