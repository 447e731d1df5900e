"""Matplotlib renderers for the CLI report paths.

Every function writes a figure straight to a file (Agg backend, no display)
so reports can pair a rendered image with the delimited data they emit.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .ident import StepFit  # noqa: E402
from .sim import SimTrace  # noqa: E402


def save_trace_figure(trace: SimTrace, path, title: str | None = None) -> None:
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(9, 9))
    axes[0].plot(trace.t, trace.v_bus, label="v_bus", lw=1.0)
    axes[0].plot(trace.t, trace.v_ref_eff, label="v_ref_eff", lw=0.8, ls="--")
    axes[0].set_ylabel("voltage [V]")
    axes[0].legend(loc="best", fontsize=8)
    axes[1].plot(trace.t, trace.i_l, label="i_l", lw=1.0)
    axes[1].plot(trace.t, trace.i_line, label="i_line", lw=0.8, ls="--")
    axes[1].set_ylabel("current [A]")
    axes[1].legend(loc="best", fontsize=8)
    axes[2].plot(trace.t, trace.p_load, lw=1.0, color="tab:red")
    axes[2].set_ylabel("load power [W]")
    axes[3].plot(trace.t, trace.duty, lw=1.0, color="tab:green")
    axes[3].set_ylabel("duty")
    axes[3].set_xlabel("time [s]")
    for t_ann, label in trace.annotations:
        axes[0].axvline(t_ann, color="crimson", ls=":", lw=1.0)
        axes[0].text(t_ann, axes[0].get_ylim()[1], label, fontsize=7,
                     rotation=90, va="top", ha="right", color="crimson")
    if title:
        fig.suptitle(title)
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_bode_figure(points, path, title: str | None = None) -> None:
    f = np.array([p.f_hz for p in points])
    mag = np.array([p.magnitude_db for p in points])
    ph = np.array([p.phase_deg for p in points])
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    ax1.semilogx(f, mag, lw=1.2)
    ax1.axhline(0.0, color="gray", lw=0.8, ls="--")
    ax1.set_ylabel("magnitude [dB]")
    ax2.semilogx(f, ph, lw=1.2, color="tab:orange")
    ax2.set_ylabel("phase [deg]")
    ax2.set_xlabel("frequency [Hz]")
    for ax in (ax1, ax2):
        ax.grid(True, which="both", alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_step_fit_figure(t, y, fit: StepFit, path, title: str | None = None) -> None:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    model = fit.y_inf + (fit.y0 - fit.y_inf) * np.exp(
        -np.clip(t - fit.t_step, 0.0, None) / fit.tau)
    model[t < fit.t_step] = fit.y0
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(t, y, lw=1.0, label="signal")
    ax.plot(t, model, lw=1.0, ls="--", label=f"first-order fit, tau = {fit.tau:.3g} s")
    y_at = fit.y0 + 0.632 * (fit.y_inf - fit.y0)
    ax.axhline(y_at, color="gray", lw=0.8, ls=":")
    ax.axvline(fit.t_step + fit.tau, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("signal")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_droop_figure(points, fit, path, title: str | None = None) -> None:
    pts = np.asarray(points, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(pts[:, 0], pts[:, 1], "o", label="settled points")
    xs = np.linspace(pts[:, 0].min(), pts[:, 0].max(), 50)
    ax.plot(xs, fit.intercept - fit.slope * xs, "--",
            label=f"fit: slope = {fit.slope:.4g}, r^2 = {fit.r_squared:.5f}")
    ax.set_xlabel("load")
    ax.set_ylabel("settled voltage [V]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_sweep_figure(rows, path, title: str | None = None) -> None:
    """p_crit versus bus capacitance, one series per (l, k) pair."""
    series: dict[tuple[float, float], list[tuple[float, float | None]]] = {}
    for r in rows:
        series.setdefault((r["l"], r["k"]), []).append((r["c"], r["p_crit"]))
    fig, ax = plt.subplots(figsize=(8, 5))
    for (l, k), pts in sorted(series.items()):
        pts.sort()
        cs = [c for c, _ in pts]
        ps = [p if p is not None else np.nan for _, p in pts]
        ax.plot(cs, ps, "o-", lw=1.0,
                label=f"l = {l:.3g} H, k = {k:.3g} ohm")
    ax.set_xlabel("bus capacitance [F]")
    ax.set_ylabel("predicted instability power [W]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
