"""Render simulation-report figures to files.

The library's report objects stay plot-free; this module turns finished
report rows into the standard panels (KL, absolute error, posterior SD, and
exposure) written as PNG files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .simulate import SimulationReport  # noqa: E402

_METRIC_PANELS = (
    ("kl_mean", "kl_sd", "KL to full-bank posterior", "kl.png"),
    ("abs_err_full_mean", "abs_err_full_sd", "Absolute score error vs full bank", "abs_err.png"),
    ("posterior_sd_mean", "posterior_sd_sd", "Posterior SD (stopping statistic)", "posterior_sd.png"),
)


def _selectors(report: SimulationReport) -> list[str]:
    seen: list[str] = []
    for row in report.rows:
        if row.selector not in seen:
            seen.append(row.selector)
    return seen


def _metric_figure(report: SimulationReport, mean_key: str, sd_key: str, title: str):
    lengths = sorted({row.test_length for row in report.rows})
    fig, axes = plt.subplots(
        1, len(lengths), figsize=(4.0 * len(lengths), 3.2), sharey=True, squeeze=False
    )
    for ax, t in zip(axes[0], lengths):
        for selector in _selectors(report):
            rows = sorted(
                (r for r in report.rows if r.selector == selector and r.test_length == t),
                key=lambda r: r.theta,
            )
            thetas = [r.theta for r in rows]
            means = [getattr(r, mean_key) for r in rows]
            sds = [getattr(r, sd_key) for r in rows]
            ax.errorbar(thetas, means, yerr=sds, label=selector, capsize=2, alpha=0.85)
        ax.set_title(f"t = {t}")
        ax.set_xlabel(r"true ability $\theta$")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel(title)
    axes[0][-1].legend(fontsize=7)
    fig.suptitle(f"{title} ({report.bank_name})")
    fig.tight_layout()
    return fig


def _exposure_figure(report: SimulationReport):
    lengths = sorted({row.test_length for row in report.rows})
    selectors = _selectors(report)
    fig, axes = plt.subplots(
        1, len(lengths), figsize=(4.0 * len(lengths), 3.2), sharey=True, squeeze=False
    )
    for ax, t in zip(axes[0], lengths):
        # Exposure pooled across theta: the widest union observed per selector.
        values = []
        for selector in selectors:
            rows = [r for r in report.rows if r.selector == selector and r.test_length == t]
            values.append(max(r.exposure_unique for r in rows))
        ax.bar(range(len(selectors)), values)
        ax.axhline(report.n_items, linestyle="--", color="k", linewidth=1)
        ax.set_xticks(range(len(selectors)))
        ax.set_xticklabels(selectors, rotation=45, ha="right", fontsize=7)
        ax.set_title(f"t = {t}")
        ax.grid(alpha=0.3, axis="y")
    axes[0][0].set_ylabel("unique items exposed")
    fig.suptitle(f"Item exposure across sessions ({report.bank_name})")
    fig.tight_layout()
    return fig


def render_report_figures(report: SimulationReport, out_dir: str | Path) -> list[Path]:
    """Write the standard report panels as PNGs; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for mean_key, sd_key, title, filename in _METRIC_PANELS:
        fig = _metric_figure(report, mean_key, sd_key, title)
        path = out / filename
        fig.savefig(path, dpi=130, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    fig = _exposure_figure(report)
    path = out / "exposure.png"
    fig.savefig(path, dpi=130, metadata={"Software": None})
    plt.close(fig)
    written.append(path)
    return written
