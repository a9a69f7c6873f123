"""Figure rendering for the report path.

One PNG per run: the loss profile along the composite path, with segment
boundaries marked and, for constrained runs, the constraint value on a twin
axis.  Rendering is headless (Agg) so it works in batch jobs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_loss_profile(ts: np.ndarray, losses: np.ndarray, out_path: str,
                        constraint_values: np.ndarray | None = None,
                        title: str = "loss along the path") -> None:
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    ax.plot(ts, losses, lw=1.2, color="tab:blue", label="loss")
    for boundary in range(1, int(np.ceil(ts.max())) + 1):
        ax.axvline(boundary, color="0.85", lw=0.8, zorder=0)
    ax.set_xlabel("path time (one unit per segment)")
    ax.set_ylabel("empirical risk")
    ax.set_title(title)

    if constraint_values is not None:
        ax2 = ax.twinx()
        ax2.plot(ts, constraint_values, lw=1.0, color="tab:red", alpha=0.7,
                 label="constraint value")
        ax2.axhline(1.0, color="tab:red", lw=0.8, ls="--", alpha=0.5)
        ax2.set_ylabel("constraint value")
        lines, labels = ax.get_legend_handles_labels()
        lines2, labels2 = ax2.get_legend_handles_labels()
        ax.legend(lines + lines2, labels + labels2, loc="upper right", fontsize=8)
    else:
        ax.legend(loc="upper right", fontsize=8)

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
