"""Boxplot rendering for Monte Carlo study reports.

One figure per (scenario, parameter): boxes grouped by method, white for
the smaller sample size and gray for the larger, with a horizontal line at
the true value. Files are written next to the delimited output.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _collect(report, scenario, n, method, attr):
    vals = [getattr(r, attr) for r in report.replicates
            if (r.scenario, r.n, r.method) == (scenario, n, method)
            and r.converged and getattr(r, attr) is not None]
    return [v for v in vals if not math.isnan(v)]


def _scenario_figure(report, scenario, attr, truth, path: Path) -> bool:
    sizes = sorted(report.sizes)
    fills = {n: shade for n, shade in zip(sizes, ("white", "0.75", "0.5", "0.3"))}
    data, positions, colors, labels = [], [], [], []
    pos = 1.0
    for m in report.methods:
        group = []
        for n in sizes:
            vals = _collect(report, scenario, n, m, attr)
            if vals:
                group.append((vals, fills[n]))
        if not group:
            continue
        for vals, shade in group:
            data.append(vals)
            positions.append(pos)
            colors.append(shade)
            pos += 0.8
        labels.append((m.upper(), positions[-len(group)] + 0.4 * (len(group) - 1)))
        pos += 0.7
    if not data:
        return False

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    boxes = ax.boxplot(data, positions=positions, widths=0.6, patch_artist=True,
                       flierprops={"marker": ".", "markersize": 3})
    for patch, shade in zip(boxes["boxes"], colors):
        patch.set_facecolor(shade)
    for med in boxes["medians"]:
        med.set_color("black")
    ax.axhline(truth, color="black", linewidth=0.8, linestyle="--")
    ax.set_xticks([x for _, x in labels])
    ax.set_xticklabels([name for name, _ in labels])
    param = "mu" if attr == "mu_hat" else "gamma"
    ax.set_ylabel(f"estimate of {param}")
    ax.set_title(f"{scenario}: {param} over {report.reps} replicates "
                 f"(white n={sizes[0]}" +
                 (f", gray n={sizes[-1]})" if len(sizes) > 1 else ")"))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def render_boxplots(report, outdir: str | Path) -> list[Path]:
    """Render per-scenario boxplots of the replicate estimates to PNG files."""
    outdir = Path(outdir)
    written = []
    for scenario in report.scenarios:
        truth_mu = truth_gamma = None
        for c in report.cells:
            if c.scenario == scenario:
                truth_mu, truth_gamma = c.true_mu, c.true_gamma
                break
        if truth_mu is None:
            continue
        path = outdir / f"mu_boxplot_{scenario}.png"
        if _scenario_figure(report, scenario, "mu_hat", truth_mu, path):
            written.append(path)
        path = outdir / f"gamma_boxplot_{scenario}.png"
        if _scenario_figure(report, scenario, "gamma_hat", truth_gamma, path):
            written.append(path)
    return written
