"""Matplotlib figure rendering for the CLI report paths (file output only)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_training_history(history, path):
    """Training loss and validation PSNR over epochs, one PNG."""
    epochs = [r.epoch for r in history]
    fig, (ax_loss, ax_psnr) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(epochs, [r.train_loss for r in history], color="tab:blue")
    ax_loss.set_yscale("log")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("training loss (MSE)")
    ax_loss.grid(True, alpha=0.3)
    ax_psnr.plot(epochs, [r.val_psnr for r in history], color="tab:orange")
    ax_psnr.set_xlabel("epoch")
    ax_psnr.set_ylabel("validation PSNR (dB)")
    ax_psnr.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_quality_report(names, reports, aggregate, path):
    """Per-image PSNR and MS-SSIM bars with the aggregate marked."""
    idx = range(len(reports))
    psnrs = [min(r.psnr_db, 99.0) for r in reports]
    fig, (ax_psnr, ax_ssim) = plt.subplots(1, 2, figsize=(11, 4))
    ax_psnr.bar(idx, psnrs, color="tab:blue")
    if aggregate.psnr_db != float("inf"):
        ax_psnr.axhline(aggregate.psnr_db, color="tab:red", linestyle="--",
                        label=f"mean {aggregate.psnr_db:.2f} dB")
        ax_psnr.legend()
    ax_psnr.set_ylabel("PSNR (dB)")
    ax_ssim.bar(idx, [r.ms_ssim for r in reports], color="tab:green")
    ax_ssim.axhline(aggregate.ms_ssim, color="tab:red", linestyle="--",
                    label=f"mean {aggregate.ms_ssim:.4f}")
    ax_ssim.set_ylim(0, 1.02)
    ax_ssim.set_ylabel("MS-SSIM")
    ax_ssim.legend()
    for ax in (ax_psnr, ax_ssim):
        ax.set_xticks(list(idx))
        ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rate_distortion(sizes, distortions, chosen, limit, path):
    """Scatter of per-image (size, distortion) options with chosen ones marked."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    n, m = sizes.shape
    for i in range(n):
        ax.plot(sizes[i], distortions[i], "o-", color="0.8", markersize=3, zorder=1)
    ax.scatter(
        [sizes[i, c] for i, c in enumerate(chosen)],
        [distortions[i, c] for i, c in enumerate(chosen)],
        color="tab:red", s=25, zorder=2, label="selected",
    )
    ax.set_xlabel("size (bytes)")
    ax.set_ylabel("distortion (SSE)")
    ax.set_title(f"budget {limit:g} bytes")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
