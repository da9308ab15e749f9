"""Figure rendering for the CLI report paths.

Each ``plot_*`` helper takes the same data that lands in the CSV and writes
one PNG next to it.  Figures are rendered with the Agg backend so they work
headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_ser", "plot_outage", "plot_pdf"]

_STYLE = {
    "mblast": dict(color="C0", marker="o"),
    "vblast": dict(color="C1", marker="s"),
    "zf": dict(color="C2", marker="^"),
    "ml": dict(color="C3", marker="d"),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)


def plot_ser(points, path, title=None):
    """Semilog SER curves, one per detector, with Wilson 95% bands."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    names = []
    for p in points:
        if p.detector not in names:
            names.append(p.detector)
    for name in names:
        pts = sorted((p for p in points if p.detector == name),
                     key=lambda p: p.snr_db)
        snr = np.array([p.snr_db for p in pts])
        ser = np.array([max(p.ser, 0.0) for p in pts])
        lo = np.array([p.ci95[0] for p in pts])
        hi = np.array([p.ci95[1] for p in pts])
        style = _STYLE.get(name, {})
        ax.semilogy(snr, np.where(ser > 0, ser, np.nan), label=name,
                    markersize=4, **style)
        ax.fill_between(snr, np.where(lo > 0, lo, np.nan), hi, alpha=0.15,
                        color=style.get("color"))
    ax.set_xlabel("average SNR per receive antenna [dB]")
    ax.set_ylabel("symbol error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_outage(analytical, empirical, path, title=None):
    """Analytical outage cdf with an optional empirical overlay and band."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(analytical.x_grid, analytical.values, "C0-", label="analytical")
    if empirical is not None:
        ax.plot(empirical.x_grid, empirical.values, "C1.", markersize=4,
                label="simulation")
        if empirical.band is not None:
            ax.fill_between(empirical.x_grid, empirical.band[0],
                            empirical.band[1], color="C1", alpha=0.2)
    ax.set_xlabel("x")
    ax.set_ylabel("outage probability")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_pdf(dist, analytic_x, analytic_pdf, path, title=None):
    """Histogram bars with the analytical density overlaid."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.bar(dist.centers, dist.absolute_density, width=dist.widths,
           color="C1", alpha=0.5, label="simulation")
    if analytic_pdf is not None:
        ax.plot(analytic_x, analytic_pdf, "C0-", label="analytical")
    ax.set_xlabel("value")
    ax.set_ylabel("density")
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)
