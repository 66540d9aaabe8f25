"""Figure rendering for training histories, evaluation grids, and
attention maps. Everything is rendered off-screen and written to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_history_plot(histories: dict[str, list], path) -> None:
    """Training and validation MSE per epoch; one line per labelled run."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
    for label, rows in histories.items():
        epochs = [r[0] for r in rows]
        axes[0].plot(epochs, [r[1] for r in rows], label=label)
        axes[1].plot(epochs, [r[2] for r in rows], label=label)
    for ax, title in zip(axes, ("training MSE", "validation MSE")):
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE")
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_report_plot(reports: dict[str, list], path) -> None:
    """Per-metric panels: mean value vs SNR, one line per labelled report,
    averaged over noise conditions."""
    metrics = sorted({row[2] for rows in reports.values() for row in rows})
    fig, axes = plt.subplots(1, len(metrics), figsize=(5 * len(metrics), 4))
    if len(metrics) == 1:
        axes = [axes]
    for ax, metric in zip(axes, metrics):
        for label, rows in reports.items():
            by_snr: dict[float, list] = {}
            for noise, snr_db, m, mean, _count in rows:
                if m == metric:
                    by_snr.setdefault(snr_db, []).append(mean)
            snrs = sorted(by_snr)
            ax.plot(snrs, [float(np.mean(by_snr[s])) for s in snrs],
                    marker="o", label=label)
        ax.set_xlabel("mixture SNR (dB)")
        ax.set_ylabel(metric)
        ax.set_title(f"{metric} vs SNR")
        ax.grid(True, alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_attention_plot(maps: list, path, max_panels: int = 8) -> None:
    """Combined attention map of each block as an image panel."""
    if not maps:
        raise ValueError("no attention maps to plot")
    if len(maps) > max_panels:
        picks = np.linspace(0, len(maps) - 1, max_panels).round().astype(int)
    else:
        picks = np.arange(len(maps))
    fig, axes = plt.subplots(1, len(picks), figsize=(3 * len(picks), 3.2))
    if len(picks) == 1:
        axes = [axes]
    for ax, i in zip(axes, picks):
        im = ax.imshow(maps[i].tf_map.T, aspect="auto", origin="lower",
                       vmin=0.0, vmax=1.0, cmap="viridis")
        ax.set_title(f"block {i + 1}")
        ax.set_xlabel("frame")
        ax.set_ylabel("channel")
    fig.colorbar(im, ax=list(axes), fraction=0.025)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
