"""SVG line plots written next to the raw data.

Metadata dates are dropped and the SVG id salt fixed so that reruns write
identical files.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .record import ResultRecord  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "nonlocal-mems"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _nums(col):
    return np.array([np.nan if v is None else v for v in col], dtype=float)


def emit_plots(record: ResultRecord, out_dir, series: Optional[dict] = None) -> list[Path]:
    """Write the plots that the record's data supports.

    A record without plottable data gets a skipped ``plots`` verdict.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if series is not None and len(series.get("t", ())) > 1:
        t = np.asarray(series["t"], dtype=float)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(t, series["sup_u"], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel("max u")
        ax.set_ylim(bottom=0)
        written.append(_save(fig, out_dir / "sup_u.svg"))

        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(t, series["E"], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(r"$E(t)=\int u\,\phi_1$")
        written.append(_save(fig, out_dir / "moment.svg"))

        if "dirichlet" in series:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for key in ("dirichlet", "nonlocal_pot", "dissipation_cum"):
                ax.plot(t, series[key], lw=1.2, label=key)
            L = (np.asarray(series["dirichlet"]) + series["nonlocal_pot"] + series["dissipation_cum"])
            ax.plot(t, L, "k--", lw=1, label="sum")
            ax.set_xlabel("t")
            ax.legend(frameon=False, fontsize=8)
            written.append(_save(fig, out_dir / "energy.svg"))

    br = record.series.get("branch")
    if br is not None:
        cols = br["columns"]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(cols["lambda"], cols["sup_w"], ".-", lw=1, ms=3)
        lam_star = record.value("lambda_star")
        ax.axvline(lam_star, color="r", ls=":", lw=1)
        ax.annotate(rf"$\lambda^*\approx{lam_star:.4f}$", (lam_star, 0.05),
                    xytext=(-70, 0), textcoords="offset points", fontsize=8)
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$\|w_\lambda\|_\infty$")
        written.append(_save(fig, out_dir / "bifurcation.svg"))

    sw = record.series.get("sweep")
    if sw is not None:
        cols = sw["columns"]
        lam = _nums(cols["lambda"])
        T = _nums(cols["T_estimate"])
        ok = np.isfinite(T)
        if ok.any():
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.loglog(lam[ok], T[ok], "o", label=r"$T_\lambda$")
            C3, lam0 = record.value("C3"), record.value("lam0")
            if C3 is not None and lam0 is not None:
                grid = np.geomspace(lam[ok].min(), lam[ok].max(), 100)
                grid = grid[grid > lam0]
                ax.loglog(grid, C3 / (grid - lam0), "k--", lw=1,
                          label=rf"${C3:.3g}/(\lambda-{lam0:.3g})$")
            ax.set_xlabel(r"$\lambda$")
            ax.set_ylabel("quenching time")
            ax.legend(frameon=False, fontsize=8)
            written.append(_save(fig, out_dir / "quench_times.svg"))

    if not written:
        record.skip("plots", "no time series or branch data to plot")
    return written
