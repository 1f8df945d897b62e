"""Figure rendering for simulation traces and envelope tables.

All plotting goes through the non-interactive Agg backend and writes PNG
files next to the delimited outputs; nothing here is required by the
simulation or analysis paths, which stay headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_trace_figures", "render_envelope_figure"]


def _cols(trace, prefix: str) -> list:
    return [c for c in trace.columns if c.startswith(prefix)]


def _plot_group(ax, t, data, labels, title, ylabel):
    for j, lab in enumerate(labels):
        ax.plot(t, data[:, j], lw=0.8, label=lab)
    ax.set_title(title)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.axhline(0.0, color="k", lw=0.5, alpha=0.5)
    if len(labels) <= 12:
        ax.legend(fontsize=6, ncol=2)


def render_trace_figures(trace, out_dir: str) -> list:
    """Render constraint-margin, torque, and pose figures for one run.

    Returns the list of files written.  An empty trace produces nothing.
    """
    if not trace.rows:
        return []
    arr = trace.as_array()
    t = arr[:, trace.columns.index("t")]
    written = []

    groups = [
        ("margins_joint.png", "h_q", "joint-limit margins", "h"),
        ("margins_rolling.png", "h_r", "contact-location margins", "h"),
        ("margins_friction.png", "fric", "friction pyramid residuals", "residual"),
        ("barriers_joint.png", "B_q", "joint barrier values", "B"),
        ("barriers_rolling.png", "B_r", "contact-location barrier values", "B"),
    ]
    for fname, prefix, title, ylabel in groups:
        labels = _cols(trace, prefix)
        if not labels:
            continue
        idx = [trace.columns.index(c) for c in labels]
        fig, ax = plt.subplots(figsize=(7, 4))
        _plot_group(ax, t, arr[:, idx], labels, title, ylabel)
        path = os.path.join(out_dir, fname)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    u_idx = [trace.columns.index(c) for c in _cols(trace, "u") if c[1:].isdigit()]
    un_idx = [trace.columns.index(c) for c in _cols(trace, "unom")]
    _plot_group(axes[0], t, arr[:, un_idx], [trace.columns[i] for i in un_idx],
                "nominal torques", "u_nom [N m]")
    _plot_group(axes[1], t, arr[:, u_idx], [trace.columns[i] for i in u_idx],
                "applied torques", "u [N m]")
    path = os.path.join(out_dir, "torques.png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    p_idx = [trace.columns.index(c) for c in ("phat_x", "phat_y", "phat_z")]
    g_idx = [trace.columns.index(c) for c in ("gammahat_x", "gammahat_y", "gammahat_z")]
    _plot_group(axes[0], t, arr[:, p_idx], ["x", "y", "z"],
                "estimated object position", "p [m]")
    _plot_group(axes[1], t, arr[:, g_idx], ["about x", "about y", "about z"],
                "estimated object orientation", "angle [rad]")
    path = os.path.join(out_dir, "object_estimate.png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def render_envelope_figure(q, bounds: dict, out_dir: str) -> str:
    """Plot velocity envelopes keyed by class-K kind; returns the file path."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for kind, (lo, hi) in bounds.items():
        line, = ax.plot(q, hi, lw=1.2, label=kind)
        ax.plot(q, lo, lw=1.2, color=line.get_color())
    ax.set_xlabel("position")
    ax.set_ylabel("admissible velocity")
    ax.set_title("barrier-induced velocity envelopes")
    ax.axhline(0.0, color="k", lw=0.5, alpha=0.5)
    ax.legend()
    path = os.path.join(out_dir, "envelope.png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
