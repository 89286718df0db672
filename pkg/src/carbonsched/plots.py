"""Matplotlib figure rendering for the CLI report paths.

All functions write straight to files with the Agg backend, so they work
headless. The shared look: intensity on the left axis, allocations as
step overlays on the right, one consistent color per policy across every
panel.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

POLICY_COLORS = {
    "agnostic": "tab:gray",
    "greedy": "tab:green",
    "sr_deadline": "tab:blue",
    "static": "tab:orange",
    "sr_threshold": "tab:purple",
}


def _policy_color(label: str) -> str:
    return POLICY_COLORS.get(label.split(":")[0], "tab:red")


def schedule_overlay_figure(intensities, window_start, allocations_by_policy, path):
    """Intensity time-series with per-policy step-plot allocation overlays."""
    slots = np.arange(window_start, window_start + len(intensities))
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(slots, intensities, color="black", lw=1.5, label="carbon intensity")
    ax.set_xlabel("slot")
    ax.set_ylabel("carbon intensity (gCO2eq/kWh)")
    ax2 = ax.twinx()
    top = 1
    for label, allocations in allocations_by_policy.items():
        xs = np.arange(window_start, window_start + len(allocations) + 1)
        ys = list(allocations) + [allocations[-1] if allocations else 0]
        ax2.step(xs, ys, where="post", lw=1.8, alpha=0.8,
                 color=_policy_color(label), label=label)
        top = max(top, max(allocations, default=1))
    ax2.set_ylabel("allocated servers")
    ax2.set_ylim(0, top * 1.3)
    handles1, labels1 = ax.get_legend_handles_labels()
    handles2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(handles1 + handles2, labels1 + labels2, loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def policy_comparison_figure(metrics_by_policy, path, baseline="agnostic"):
    """Carbon bars per policy with savings percentages on top."""
    labels = list(metrics_by_policy)
    carbons = [metrics_by_policy[lab]["carbon_g"] for lab in labels]
    base = metrics_by_policy.get(baseline, {}).get("carbon_g")
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(labels, carbons, color=[_policy_color(lab) for lab in labels])
    for bar, carbon in zip(bars, carbons):
        note = f"{carbon:.1f}"
        if base and base > 0:
            note += f"\n({100 * (1 - carbon / base):+.1f}%)"
        ax.annotate(note, (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("carbon")
    ax.set_ylim(0, max(carbons) * 1.25 if carbons else 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def sweep_figure(summary, path):
    """Mean carbon per policy against the swept axis value."""
    cells = summary["cells"]
    policies = sorted({c["policy"] for c in cells})
    fig, ax = plt.subplots(figsize=(7, 4))
    for policy in policies:
        points = sorted(
            (c["axis_value"], c["mean_carbon_g"]) for c in cells if c["policy"] == policy
        )
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o",
                color=_policy_color(policy), label=policy)
    ax.set_xlabel(summary["axis"])
    ax.set_ylabel("mean carbon")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
