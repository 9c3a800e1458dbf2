"""Static figures for CLI reports (matplotlib, Agg backend)."""

from __future__ import annotations

from typing import Any, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_pointer_sweep(rows: Sequence[Mapping[str, Any]], path: str) -> None:
    lam = [r["lambda"] for r in rows]
    dev = [abs(r["mean_shift"] - r["first_order_mean_shift"]) for r in rows]
    res = [r["residual_norm"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(lam, res, "o-", label="residual norm")
    if any(d > 0 for d in dev):
        ax.loglog(lam, [max(d, 1e-300) for d in dev], "s--", label="|mean shift - first order|")
    ax.set_xlabel("lambda / sigma")
    ax.legend()
    _save(fig, path)


def plot_trace_map(rows: Sequence[Mapping[str, Any]], path: str) -> None:
    names = [r["segment"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(names)), 3.5))
    ax.bar(names, [complex(r["weak_value"]).real for r in rows])
    ax.axhline(0, color="k", lw=0.8)
    ax.set_ylabel("Re weak value of segment projector")
    _save(fig, path)


def plot_histogram(rows: Sequence[Mapping[str, Any]], path: str) -> None:
    lo = [r["bin_lo"] for r in rows]
    width = [r["bin_hi"] - r["bin_lo"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(lo, [r["count"] for r in rows], width=width, align="edge")
    ax.set_xlabel("pointer readout")
    ax.set_ylabel("count")
    _save(fig, path)


def plot_fringe_sweep(rows: Sequence[Mapping[str, Any]], path: str) -> None:
    th = [r["theta_b"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key in ("D", "V", "dv_sum", "leak"):
        ax.plot(th, [r[key] for r in rows], label=key)
    ax.set_xlabel("tag angle on B (rad)")
    ax.legend()
    _save(fig, path)


PLOTTERS = {
    "pointer-sweep": plot_pointer_sweep,
    "trace-map": plot_trace_map,
    "ensemble-histogram": plot_histogram,
    "fringe-sweep": plot_fringe_sweep,
}
