"""File-based matplotlib rendering for experiment outputs.

Figures are written next to the delimited tables by the report path;
everything renders through the Agg backend so no display is needed.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "table1_figure",
    "warmup_bench_figure",
    "bias_figure",
    "regret_figure",
    "design_figure",
]

_METHOD_ORDER = ("naive", "war", "oracle")


def _save(fig, path):
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def table1_figure(path, rows):
    """Mean total warmup samples per method against S, log scale."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    svals = sorted({float(r["S"]) for r in rows})
    for method in _METHOD_ORDER:
        means = []
        for s in svals:
            totals = [float(r["total"]) for r in rows
                      if r["method"] == method and float(r["S"]) == s]
            means.append(np.mean(totals) if totals else np.nan)
        ax.plot(svals, means, marker="o", label=method)
    ax.set_yscale("log")
    ax.set_xlabel("S")
    ax.set_ylabel("warmup samples")
    ax.set_title("Warmup cost by method")
    ax.legend()
    return _save(fig, path)


def warmup_bench_figure(path, rows):
    """Boxplots of total samples per method, pooled over S and repeats."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    data = [
        [float(r["total"]) for r in rows if r["method"] == method]
        for method in _METHOD_ORDER
    ]
    ax.boxplot(data, tick_labels=list(_METHOD_ORDER))
    ax.set_yscale("log")
    ax.set_ylabel("total samples")
    ax.set_title("Warmup benchmark")
    return _save(fig, path)


def bias_figure(path, rows):
    """Normalized bias against N for each estimator, log-x."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for est in ("mle", "kt"):
        pts = sorted(
            (int(r["N"]), abs(float(r["normalized_bias"])))
            for r in rows if r["estimator"] == est
        )
        if pts:
            ns, vals = zip(*pts)
            ax.plot(ns, vals, marker="o", label=est)
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("|normalized bias|")
    ax.set_title("Exact estimator bias")
    ax.legend()
    return _save(fig, path)


def regret_figure(path, curves):
    """Per-seed regret curves, one color per policy, mean final in the legend."""
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    policies = []
    for policy, _ in sorted(curves):
        if policy not in policies:
            policies.append(policy)
    cmap = plt.get_cmap("tab10")
    for ci, policy in enumerate(policies):
        finals = []
        for (pol, _), (tt, cum) in sorted(curves.items()):
            if pol != policy:
                continue
            ax.plot(tt, cum, color=cmap(ci % 10), alpha=0.25, linewidth=0.8)
            finals.append(cum[-1])
        ax.plot([], [], color=cmap(ci % 10),
                label="%s (mean final %.0f)" % (policy, np.mean(finals)))
    ax.set_xlabel("t")
    ax.set_ylabel("cumulative pseudo-regret")
    ax.set_title("Regret")
    ax.legend()
    return _save(fig, path)


def design_figure(path, vectors, g_weights, h_weights, theta):
    """Contrast the two designs: scatter in 2-d, grouped bars otherwise."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape[1] == 2:
        fig, axes = plt.subplots(1, 2, figsize=(8.5, 4.0), sharex=True, sharey=True)
        for ax, weights, name in ((axes[0], g_weights, "g design"),
                                  (axes[1], h_weights, "h design")):
            w = np.asarray(weights, dtype=float)
            ax.scatter(vectors[:, 0], vectors[:, 1], s=8, color="0.8")
            mask = w > 0
            ax.scatter(vectors[mask, 0], vectors[mask, 1],
                       s=40 + 900 * w[mask], alpha=0.7)
            scale = 1.0 / max(np.linalg.norm(theta), 1e-12)
            ax.annotate("", xy=tuple(theta * scale), xytext=(0.0, 0.0),
                        arrowprops=dict(arrowstyle="->", color="tab:red"))
            ax.set_title(name)
            ax.set_aspect("equal")
    else:
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        idx = np.arange(vectors.shape[0])
        ax.bar(idx - 0.2, np.asarray(g_weights, dtype=float), width=0.4, label="g")
        ax.bar(idx + 0.2, np.asarray(h_weights, dtype=float), width=0.4, label="h")
        ax.set_xlabel("arm index")
        ax.set_ylabel("weight")
        ax.legend()
        ax.set_title("Design weights")
    return _save(fig, path)
