"""Matplotlib rendering of the toolkit's tables to figure files.

Each function takes the arrays a CLI command just wrote as CSV and
renders the matching figure next to it.  The Agg backend keeps this
usable headless; PNG output carries no timestamps, so reruns are
byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FIGSIZE = (6.4, 4.0)


def _finish(fig, ax, path, xlabel, ylabel, legend=True):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if legend:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_schedule(table, path):
    """gamma curves versus reduced time (columns s, gd1, gd2, gp)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for col, label in ((1, r"$\gamma_{d1}$"), (2, r"$\gamma_{d2}$"),
                       (3, r"$\gamma_p$")):
        ax.plot(table[:, 0], table[:, col], label=label)
    _finish(fig, ax, path, "reduced time s", "schedule value")


def plot_levels(table, path, xlabel="reduced time s"):
    """Level curves (columns x, E0..E3)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for k in range(4):
        ax.plot(table[:, 0], table[:, 1 + k], label=f"E{k}")
    _finish(fig, ax, path, xlabel, "energy (GHz)")


def plot_gaps(table, s_star, path):
    """Exact/approximate/tilde gaps (columns s, exact, approx, tilde)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(table[:, 0], table[:, 1], label="exact")
    ax.plot(table[:, 0], table[:, 2], "--", label="approximate")
    ax.plot(table[:, 0], table[:, 3], ":", label="tilde")
    ax.axvline(s_star, color="0.6", lw=0.8)
    ax.axhline(0.0, color="0.8", lw=0.6)
    _finish(fig, ax, path, "reduced time s", "gap (GHz)")


def plot_oscillation(table, path):
    """Final ground population versus total anneal time."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(table[:, 0], table[:, 1], ".-", ms=3)
    ax.set_ylim(-0.02, 1.02)
    _finish(fig, ax, path, "total anneal time $t_f$ (ns)",
            "final ground population", legend=False)


def plot_waveform(table, path):
    """Gate excursion s(t) (columns t, s)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(table[:, 0], table[:, 1])
    _finish(fig, ax, path, "time (ns)", "reduced time s", legend=False)


def plot_gate_trace(table, path):
    """Levels and instantaneous-basis populations along the gate."""
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True,
                                   figsize=(6.4, 6.0))
    for k in range(4):
        ax1.plot(table[:, 0], table[:, 1 + k], label=f"E{k}")
        ax2.plot(table[:, 0], table[:, 5 + k], label=f"P{k}")
    ax1.set_ylabel("energy (GHz)")
    ax1.legend(frameon=False, ncol=4, fontsize=8)
    ax2.set_xlabel("time (ns)")
    ax2.set_ylabel("population")
    ax2.set_ylim(-0.02, 1.02)
    ax2.legend(frameon=False, ncol=4, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_chi(chi, labels, path):
    """Process-matrix magnitudes as a labeled 16x16 map."""
    fig, ax = plt.subplots(figsize=(6.8, 6.0))
    im = ax.imshow(np.abs(chi), cmap="viridis", vmin=0.0)
    ax.set_xticks(range(16), labels, rotation=90, fontsize=7)
    ax.set_yticks(range(16), labels, fontsize=7)
    fig.colorbar(im, ax=ax, label=r"$|\chi_{mn}|$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_flux_x(table, path):
    """x-loop flux biases versus time (columns t, fx1, fx2, ...)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(table[:, 0], table[:, 1], label="fx1")
    ax.plot(table[:, 0], table[:, 2], label="fx2")
    _finish(fig, ax, path, "time (ns)", r"x-loop flux ($\Phi_0$)")


def plot_flux_z(table, path):
    """z-loop and coupler fluxes versus time."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(table[:, 0], table[:, 3], label="fz1")
    ax.plot(table[:, 0], table[:, 4], label="fz2")
    ax.plot(table[:, 0], table[:, 5], "--", label="fc")
    _finish(fig, ax, path, "time (ns)", r"flux ($\Phi_0$)")
