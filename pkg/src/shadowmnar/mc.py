"""Monte Carlo replication harness for the simulation study.

Runs a grid of (scenario, sample size) cells, applies the requested
estimators to each replicate, and aggregates bias, spread, interval
coverage and interval length. Per-replicate estimates are retained for
export and plotting. Replicate seeds are derived from (master seed,
scenario, n, replicate index), so any cell can be reproduced in isolation
and aggregation order never matters.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datagen import SCENARIOS, ScenarioConfig, analysis_spec, generate, true_mu
from .estimators import ESTIMATORS, Method

_GAMMA_METHODS = {Method.DR, Method.IPW, Method.REG}


@dataclass(frozen=True)
class ReplicateRecord:
    scenario: str
    n: int
    method: str
    rep: int
    converged: bool
    mu_hat: float = math.nan
    se_mu: float = math.nan
    mu_covered: bool | None = None
    gamma_hat: float | None = None
    se_gamma: float | None = None
    gamma_covered: bool | None = None
    error: str = ""


@dataclass
class CellSummary:
    """Aggregates for one (scenario, n, method) cell.

    Coverage is computed over converged replicates only; the nonconverged
    count is disclosed alongside. ``coverage_se`` fields are the binomial
    Monte Carlo standard errors of the coverage estimates.
    """

    scenario: str
    n: int
    method: str
    replications: int
    converged: int
    nonconverged_count: int
    true_mu: float
    true_gamma: float
    mean_mu: float = math.nan
    sd_mu: float = math.nan
    coverage_mu: float = math.nan
    coverage_mu_se: float = math.nan
    ci_length_mu: float = math.nan
    mean_se_mu: float = math.nan
    mean_gamma: float = math.nan
    sd_gamma: float = math.nan
    coverage_gamma: float = math.nan
    coverage_gamma_se: float = math.nan


@dataclass
class MCReport:
    scenarios: list[str]
    sizes: list[int]
    reps: int
    methods: list[str]
    seed: int
    cells: list[CellSummary]
    replicates: list[ReplicateRecord] = field(repr=False, default_factory=list)

    def cell(self, scenario: str, n: int, method: str) -> CellSummary:
        for c in self.cells:
            if (c.scenario, c.n, c.method) == (scenario, n, str(Method(method).value)):
                return c
        raise KeyError((scenario, n, method))


def replicate_seed(master_seed: int, scenario: str, n: int, rep: int) -> int:
    """Deterministic per-replicate seed; cells are independently reproducible."""
    ss = np.random.SeedSequence((master_seed, SCENARIOS.index(scenario), n, rep))
    return int(ss.generate_state(1, np.uint64)[0])


def _zcrit(level: float) -> float:
    from scipy.stats import norm
    return float(norm.ppf(0.5 + level / 2.0))


def run_replicate(scenario: str, n: int, rep: int, methods: list[str],
                  master_seed: int, mu_true: float, gamma_true: float,
                  level: float = 0.95,
                  overrides: dict | None = None) -> list[ReplicateRecord]:
    cfg = ScenarioConfig(scenario=scenario, n=n,
                         seed=replicate_seed(master_seed, scenario, n, rep),
                         **(overrides or {}))
    data = generate(cfg).without_oracle()
    spec = analysis_spec()
    out = []
    for m in methods:
        method = Method(m)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = ESTIMATORS[method](data, spec, level=level)
        except Exception as exc:  # noqa: BLE001 - per-replicate failures never abort a study
            out.append(ReplicateRecord(scenario, n, method.value, rep,
                                       converged=False, error=repr(exc)))
            continue
        rec = ReplicateRecord(
            scenario, n, method.value, rep, converged=res.converged,
            mu_hat=res.mu_hat, se_mu=res.se_mu,
            mu_covered=bool(res.ci_mu[0] <= mu_true <= res.ci_mu[1]),
            gamma_hat=res.gamma_hat, se_gamma=res.se_gamma,
            gamma_covered=None if res.ci_gamma is None else
            bool(res.ci_gamma[0] <= gamma_true <= res.ci_gamma[1]),
        )
        out.append(rec)
    return out


def _run_batch(args) -> list[ReplicateRecord]:
    scenario, n, reps, methods, master_seed, mu_true, gamma_true, level, overrides = args
    recs = []
    for rep in reps:
        recs.extend(run_replicate(scenario, n, rep, methods, master_seed,
                                  mu_true, gamma_true, level, overrides))
    return recs


def _summarize(scenario: str, n: int, method: str, recs: list[ReplicateRecord],
               mu_true: float, gamma_true: float) -> CellSummary:
    total = len(recs)
    ok = [r for r in recs if r.converged]
    cell = CellSummary(scenario=scenario, n=n, method=method, replications=total,
                       converged=len(ok), nonconverged_count=total - len(ok),
                       true_mu=mu_true, true_gamma=gamma_true)
    if not ok:
        return cell
    mu = np.array([r.mu_hat for r in ok])
    cell.mean_mu = float(mu.mean())
    cell.sd_mu = float(mu.std(ddof=1)) if len(ok) > 1 else math.nan
    cov_mu = np.array([r.mu_covered for r in ok], dtype=float)
    cell.coverage_mu = float(cov_mu.mean())
    cell.coverage_mu_se = float(np.sqrt(cell.coverage_mu * (1 - cell.coverage_mu) / len(ok)))
    cell.ci_length_mu = float(np.mean([2 * _zcrit(0.95) * r.se_mu for r in ok]))
    cell.mean_se_mu = float(np.mean([r.se_mu for r in ok]))
    g = [r for r in ok if r.gamma_hat is not None]
    if g:
        gh = np.array([r.gamma_hat for r in g])
        cell.mean_gamma = float(gh.mean())
        cell.sd_gamma = float(gh.std(ddof=1)) if len(g) > 1 else math.nan
        cg = np.array([r.gamma_covered for r in g], dtype=float)
        cell.coverage_gamma = float(cg.mean())
        cell.coverage_gamma_se = float(np.sqrt(cell.coverage_gamma * (1 - cell.coverage_gamma) / len(g)))
    return cell


def run_study(scenarios: list[str], sizes: list[int], reps: int,
              methods: list[str], seed: int, *, level: float = 0.95,
              n_jobs: int = 1, overrides: dict | None = None) -> MCReport:
    """Run the full replication grid and aggregate each cell.

    Per-replicate failures and nonconvergences are recorded and excluded
    from coverage (with counts disclosed); they never abort the study.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    methods = [Method(m).value for m in methods]
    scenarios = list(scenarios)
    sizes = list(sizes)

    tasks = []
    truths = {}
    for scen in scenarios:
        cfg0 = ScenarioConfig(scenario=scen, n=1, seed=0, **(overrides or {}))
        truths[scen] = (true_mu(cfg0), cfg0.gamma)
        for n in sizes:
            mu_t, g_t = truths[scen]
            chunk = max(1, reps // max(1, 4 * n_jobs))
            for lo in range(0, reps, chunk):
                rep_range = range(lo, min(lo + chunk, reps))
                tasks.append((scen, n, rep_range, methods, seed, mu_t, g_t,
                              level, overrides))

    all_recs: list[ReplicateRecord] = []
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for batch in pool.map(_run_batch, tasks):
                all_recs.extend(batch)
    else:
        for t in tasks:
            all_recs.extend(_run_batch(t))
    all_recs.sort(key=lambda r: (r.scenario, r.n, r.method, r.rep))

    cells = []
    for scen in scenarios:
        mu_t, g_t = truths[scen]
        for n in sizes:
            for m in methods:
                recs = [r for r in all_recs
                        if (r.scenario, r.n, r.method) == (scen, n, m)]
                cells.append(_summarize(scen, n, m, recs, mu_t, g_t))
    return MCReport(scenarios=scenarios, sizes=sizes, reps=reps, methods=methods,
                    seed=seed, cells=cells, replicates=all_recs)


def export_report(report: MCReport, outdir: str | Path, *, figures: bool = True) -> list[Path]:
    """Write the coverage table, per-replicate estimate dumps, a JSON
    summary, and (by default) boxplot figures of the per-replicate
    estimates, into ``outdir``."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        written = [_write_coverage_table(report, outdir)]
        written.extend(_write_replicates(report, outdir))
        written.append(_write_summary_json(report, outdir))
        if figures:
            from .plots import render_boxplots
            written.extend(render_boxplots(report, outdir))
    except OSError as exc:
        raise OSError(f"cannot write report under {outdir}: {exc}") from exc
    return written


def _write_coverage_table(report: MCReport, outdir: Path) -> Path:
    path = outdir / "coverage_table.csv"
    methods = report.methods
    header = (["scenario", "n"] + [f"mu_{m}" for m in methods]
              + [f"gamma_{m}" for m in methods])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        if not methods:
            return path
        for scen in report.scenarios:
            for n in report.sizes:
                row = [scen, n]
                for m in methods:
                    row.append(_cov_str(report.cell(scen, n, m).coverage_mu))
                for m in methods:
                    row.append(_cov_str(report.cell(scen, n, m).coverage_gamma))
                w.writerow(row)
    return path


def _cov_str(v: float) -> str:
    return "" if math.isnan(v) else f"{v:.3f}"


def _write_replicates(report: MCReport, outdir: Path) -> list[Path]:
    paths = []
    fields = ["rep", "converged", "mu_hat", "se_mu", "mu_covered",
              "gamma_hat", "se_gamma", "gamma_covered", "error"]
    for scen in report.scenarios:
        for n in report.sizes:
            for m in report.methods:
                path = outdir / f"{scen}_{n}_{m}.csv"
                recs = [r for r in report.replicates
                        if (r.scenario, r.n, r.method) == (scen, n, m)]
                with path.open("w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(fields)
                    for r in recs:
                        w.writerow([getattr(r, f) for f in fields])
                paths.append(path)
    return paths


def _write_summary_json(report: MCReport, outdir: Path) -> Path:
    path = outdir / "summary.json"
    payload = {
        "config": {"scenarios": report.scenarios, "sizes": report.sizes,
                   "reps": report.reps, "methods": report.methods,
                   "seed": report.seed},
        "cells": [asdict(c) for c in report.cells],
    }
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2)
    return path
