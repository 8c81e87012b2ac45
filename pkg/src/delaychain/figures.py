"""Matplotlib renderings of the measurement outputs, saved as SVG files.

All figures are written with a fixed hash salt and no date metadata so
reruns produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["svg.hashsalt"] = "delaychain"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def fig_f_curve(points, path, title="Delay neuron transfer"):
    """Input vs output rate with the identity line."""
    points = np.asarray(points)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    lim = points[:, 0].max() * 1.05
    ax.plot([0, lim], [0, lim], color="0.7", lw=1, ls="--", label="one-to-one")
    ax.plot(points[:, 0], points[:, 1], "o-", color="tab:blue", ms=4)
    ax.set_xlabel("input rate (Hz)")
    ax.set_ylabel("output rate (Hz)")
    ax.set_title(title)
    ax.legend(frameon=False)
    _save(fig, path)


def fig_output_curves(curves_by_weight, path):
    """Output-neuron transfer at several connection strengths."""
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    lim = 0.0
    for label, points in curves_by_weight.items():
        points = np.asarray(points)
        lim = max(lim, points[:, 0].max() * 1.05)
        ax.plot(points[:, 0], points[:, 1], "o-", ms=4, label=label)
    ax.plot([0, lim], [0, lim], color="0.7", lw=1, ls="--")
    ax.set_xlabel("input rate (Hz)")
    ax.set_ylabel("output rate (Hz)")
    ax.set_title("Output neuron transfer by weight")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def fig_delay_histogram(delays_s, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.hist(np.asarray(delays_s) * 1e3, bins=24, color="tab:orange", edgecolor="white")
    ax.set_xlabel("measured delay (ms)")
    ax.set_ylabel("neurons")
    ax.set_title("Calibrated delay distribution")
    _save(fig, path)


def fig_chain_raster(first_last_by_channel, path):
    """First vs last neuron spike times per chain, one color per chain."""
    fig, ax = plt.subplots(figsize=(6.5, 3.8))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    yticks, ylabels = [], []
    y = 0
    for k, (channel, (first, last)) in enumerate(first_last_by_channel.items()):
        color = colors[k % len(colors)]
        ax.vlines(first.times, y + 0.6, y + 1.4, color=color, lw=0.8)
        ax.vlines(last.times, y + 1.6, y + 2.4, color=color, lw=0.8, alpha=0.6)
        yticks += [y + 1, y + 2]
        ylabels += [f"{channel} first", f"{channel} last"]
        y += 2.6
    ax.set_yticks(yticks, ylabels, fontsize=7)
    ax.set_xlabel("time (s)")
    ax.set_title("Spike pattern at chain entry and exit")
    _save(fig, path)


def fig_output_raster(outputs, net, span, path, duration=None):
    """Raster of all output neurons with memory-span marks."""
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    rows = [("DOWN", net.output_down), ("UP", net.output_up)]
    y = 0
    yticks, ylabels = [], []
    t_max = 0.0
    for polarity, ids in rows:
        for k, nid in enumerate(ids):
            times = outputs[nid].times
            if len(times):
                t_max = max(t_max, times[-1])
            ax.vlines(times, y + 0.2, y + 0.8, color="tab:blue" if polarity == "UP"
                      else "tab:red", lw=0.6)
            if k == len(ids) // 2:
                yticks.append(y + 0.5)
                ylabels.append(polarity)
            y += 1
        y += 1.5
    duration = duration or t_max
    for m in range(1, int(duration / span) + 1):
        ax.axvline(m * span, color="0.6", ls=":", lw=0.8)
    ax.set_yticks(yticks, ylabels)
    ax.set_xlabel("time (s)")
    ax.set_title("Output neuron activity (dotted: memory-span multiples)")
    _save(fig, path)


def fig_spatial_profile(down_profile, up_profile, down_history, up_history, path):
    """Step-resolved output rates against the input history they mirror."""
    fig, axes = plt.subplots(2, 1, figsize=(5.5, 4.6), sharex=True)
    steps = np.arange(len(down_profile))
    for ax, profile, history, label in (
            (axes[0], down_profile, down_history, "DOWN"),
            (axes[1], up_profile, up_history, "UP")):
        ax.plot(steps, profile, "o-", label=f"{label} output rate", color="tab:blue")
        scale = (profile.max() / history.max()) if history.max() > 0 else 1.0
        ax.plot(steps, history * scale, "s--", label="weighted input history",
                color="tab:gray", ms=4)
        ax.set_ylabel("rate (Hz)")
        ax.legend(frameon=False, fontsize=8)
    axes[1].set_xlabel("chain step (older input toward higher steps)")
    axes[0].set_title("Temporal input mapped onto spatial rates")
    _save(fig, path)


def fig_confusion(confusion, path, title="Confusion"):
    confusion = np.asarray(confusion)
    fig, ax = plt.subplots(figsize=(3.8, 3.4))
    im = ax.imshow(confusion, cmap="Blues")
    for (r, c), v in np.ndenumerate(confusion):
        ax.text(c, r, str(int(v)), ha="center", va="center", fontsize=8,
                color="black" if v < confusion.max() * 0.6 else "white")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    _save(fig, path)
