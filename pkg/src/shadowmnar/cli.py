"""Command-line front end: simulate, estimate, identify-binary.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation
nonconvergence. Every output directory receives the fully resolved
configuration as JSON, sufficient to re-run the command bit-identically.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .binaryid import (
    BinaryObservables,
    InfeasibleObservablesError,
    NonIdentifiedError,
    check_uniqueness,
    solve_binary,
)
from .data import DataError, ShadowDataset
from .datagen import SCENARIOS
from .design import DesignError, DesignSpec
from .estimators import ESTIMATORS, Method
from .model import (
    BaselineOutcome,
    BaselinePropensity,
    InstrumentSpec,
    LogOddsRatioModel,
    ModelSpec,
)
from .mc import export_report, run_study

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4

_DISPLAY = {Method.DR: "DR", Method.REG: "REG", Method.IPW: "IPW",
            Method.CMP: "CMP", Method.MARIPW: "marIPW"}
_TABLE_ORDER = [Method.DR, Method.REG, Method.IPW, Method.CMP, Method.MARIPW]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved configuration for the ``estimate`` subcommand."""

    data: str
    outcome: str
    shadow: str
    covariates: list[str]
    missing_indicator: str | None = None
    na_token: str = ""
    propensity_design: str = ""
    outcome_design: str = ""
    shadow_design: str = ""
    h_design: str = ""
    methods: list[str] = field(default_factory=lambda: [m.value for m in _TABLE_ORDER])
    level: float = 0.95
    reg_observed_y: bool = False
    out: str = "."

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ConfigError(f"confidence level must be in (0, 1), got {self.level}")
        if not self.covariates:
            raise ConfigError("at least one covariate column is required")
        overlap = {self.outcome, self.shadow} & set(self.covariates)
        if overlap or self.outcome == self.shadow:
            raise ConfigError("outcome, shadow and covariate columns must be distinct")
        try:
            self.methods = [Method(m.strip().lower()).value for m in self.methods]
        except ValueError as exc:
            raise ConfigError(f"unknown method: {exc}") from exc

    def model_spec(self) -> ModelSpec:
        default = ", ".join(self.covariates)
        try:
            d_prop = DesignSpec.parse(self.propensity_design or default)
            d_out = DesignSpec.parse(self.outcome_design or default)
            d_shad = DesignSpec.parse(self.shadow_design or default)
            d_h = DesignSpec.parse(self.h_design) if self.h_design else None
        except DesignError as exc:
            raise ConfigError(str(exc)) from exc
        return ModelSpec(
            or_model=LogOddsRatioModel(0.0),
            propensity=BaselinePropensity(np.zeros(d_prop.dim), d_prop),
            outcome=BaselineOutcome(
                beta1=np.zeros(d_out.dim), sigma1=1.0, design1=d_out,
                beta2=np.zeros(d_shad.dim), beta22=0.0, sigma2=1.0, design2=d_shad),
            h_spec=InstrumentSpec(x_design=d_h),
        )


def ingest_csv(path: str | Path, cfg: RunConfig) -> ShadowDataset:
    """Parse a headered CSV into a dataset under the configured column map.

    The outcome may be missing (empty field or the configured token, or an
    explicit 0/1 missing indicator column); shadow and covariate columns
    must be complete, and violations are hard errors naming the offending
    rows.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    needed = [cfg.outcome, cfg.shadow, *cfg.covariates]
    if cfg.missing_indicator:
        needed.append(cfg.missing_indicator)
    rows_y, rows_z, rows_r = [], [], []
    rows_cov: dict[str, list[float]] = {c: [] for c in cfg.covariates}
    incomplete: list[tuple[int, str]] = []
    bad_numeric: list[tuple[int, str, str]] = []

    def parse_required(value: str, rownum: int, colname: str) -> float:
        if value is None or value.strip() == "" or value.strip() == cfg.na_token:
            incomplete.append((rownum, colname))
            return np.nan
        try:
            return float(value)
        except ValueError:
            bad_numeric.append((rownum, colname, value))
            return np.nan

    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, header row required")
        missing_cols = [c for c in needed if c not in reader.fieldnames]
        if missing_cols:
            raise DataError(f"{path}: missing required columns {missing_cols}")
        for i, row in enumerate(reader, start=2):  # header is line 1
            raw_y = row[cfg.outcome]
            y_missing = raw_y is None or raw_y.strip() == "" or raw_y.strip() == cfg.na_token
            if cfg.missing_indicator:
                rv = row[cfg.missing_indicator].strip()
                if rv not in ("0", "1"):
                    bad_numeric.append((i, cfg.missing_indicator, rv))
                    r = 0
                else:
                    r = int(rv)
                if r == 1 and y_missing:
                    incomplete.append((i, cfg.outcome))
            else:
                r = 0 if y_missing else 1
            rows_r.append(r)
            if r == 1 and not y_missing:
                try:
                    rows_y.append(float(raw_y))
                except ValueError:
                    bad_numeric.append((i, cfg.outcome, raw_y))
                    rows_y.append(np.nan)
            else:
                rows_y.append(np.nan)
            rows_z.append(parse_required(row[cfg.shadow], i, cfg.shadow))
            for c in cfg.covariates:
                rows_cov[c].append(parse_required(row[c], i, c))

    if bad_numeric:
        shown = "; ".join(f"line {r}, column {c!r}: {v!r}" for r, c, v in bad_numeric[:10])
        raise DataError(f"{path}: unparseable numeric fields ({shown}"
                        + (", ..." if len(bad_numeric) > 10 else ")"))
    if incomplete:
        shown = "; ".join(f"line {r}, column {c!r}" for r, c in incomplete[:10])
        raise DataError(
            f"{path}: shadow/covariate values must be fully observed and the "
            f"outcome present wherever the indicator says so ({shown}"
            + (", ..." if len(incomplete) > 10 else ")"))
    if not rows_r:
        raise DataError(f"{path}: no data rows")
    ds = ShadowDataset(
        covariates={c: np.array(v) for c, v in rows_cov.items()},
        z=np.array(rows_z), r=np.array(rows_r), y=np.array(rows_y))
    return ds


def _echo_config(payload: dict, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with (outdir / "config.json").open("w") as fh:
        json.dump(payload, fh, indent=2, default=str)


def run_estimate(cfg: RunConfig) -> int:
    """Run the requested estimators and write the results table."""
    try:
        data = ingest_csv(cfg.data, cfg)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        spec = cfg.model_spec()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(cfg.out)
    _echo_config({"command": "estimate", **asdict(cfg),
                  "n": data.n, "missing_fraction": data.missing_fraction}, outdir)
    print(f"ingested {data.n} records, missing fraction {data.missing_fraction:.3f}")

    rows = []
    failures = 0
    results_json = {}
    order = [m for m in _TABLE_ORDER if m.value in cfg.methods]
    for method in order:
        kwargs = {"level": cfg.level}
        if method == Method.REG and cfg.reg_observed_y:
            kwargs["use_observed_y"] = True
        try:
            res = ESTIMATORS[method](data, spec, **kwargs)
            status = "ok" if res.converged else "nonconverged"
        except Exception as exc:  # noqa: BLE001 - recorded per-method
            rows.append([_DISPLAY[method], "error", "", "", "", "", "", "", repr(exc)])
            results_json[method.value] = {"status": "error", "error": repr(exc)}
            failures += 1
            continue
        if not res.converged:
            failures += 1
        diag = ";".join(f"{k}={v}" for k, v in sorted(res.diagnostics.items())
                        if np.isscalar(v))
        rows.append([
            _DISPLAY[method], status,
            f"{res.mu_hat:.6g}", f"{res.ci_mu[0]:.6g}", f"{res.ci_mu[1]:.6g}",
            "" if res.gamma_hat is None else f"{res.gamma_hat:.6g}",
            "" if res.ci_gamma is None else f"{res.ci_gamma[0]:.6g}",
            "" if res.ci_gamma is None else f"{res.ci_gamma[1]:.6g}",
            diag,
        ])
        results_json[method.value] = {
            "status": status, "mu_hat": res.mu_hat, "se_mu": res.se_mu,
            "ci_mu": list(res.ci_mu), "gamma_hat": res.gamma_hat,
            "se_gamma": res.se_gamma,
            "ci_gamma": None if res.ci_gamma is None else list(res.ci_gamma),
            "diagnostics": {k: v for k, v in res.diagnostics.items() if np.isscalar(v)},
        }

    with (outdir / "results.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "status", "mu_hat", "mu_ci_low", "mu_ci_high",
                    "gamma_hat", "gamma_ci_low", "gamma_ci_high", "diagnostics"])
        w.writerows(rows)
    with (outdir / "results.json").open("w") as fh:
        json.dump(results_json, fh, indent=2, default=float)
    for row in rows:
        print("  ".join(str(c) for c in row[:8]))
    return EXIT_ESTIMATION if failures else EXIT_OK


def run_simulate(args) -> int:
    scenarios = list(SCENARIOS) if args.scenario == "all" else [args.scenario]
    sizes = args.sizes or [args.n]
    methods = args.methods
    outdir = Path(args.out)
    _echo_config({"command": "simulate", "scenarios": scenarios, "sizes": sizes,
                  "reps": args.reps, "methods": methods, "seed": args.seed,
                  "level": args.level, "jobs": args.jobs,
                  "figures": not args.no_figures}, outdir)
    report = run_study(scenarios, sizes, args.reps, methods, args.seed,
                       level=args.level, n_jobs=args.jobs)
    written = export_report(report, outdir, figures=not args.no_figures)
    for c in report.cells:
        print(f"{c.scenario} n={c.n} {c.method}: coverage_mu={c.coverage_mu:.3f} "
              f"coverage_gamma={c.coverage_gamma:.3f} "
              f"nonconverged={c.nonconverged_count}")
    print(f"wrote {len(written)} files under {outdir}")
    return EXIT_OK


def run_identify_binary(args) -> int:
    vals_r1 = args.r1
    vals_r0 = args.r0
    try:
        if args.counts:
            obs, total = BinaryObservables.from_counts(
                np.array(vals_r1).reshape(2, 2), np.array(vals_r0))
            print(f"normalized {total} observations")
        else:
            obs = BinaryObservables(np.array(vals_r1).reshape(2, 2), np.array(vals_r0))
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out: dict = {}
    try:
        joint = solve_binary(obs)
        out["solution"] = {"eta0": joint.eta[0], "eta1": joint.eta[1],
                           "pz": joint.pz, "q0": joint.py_r[0], "q1": joint.py_r[1]}
        status = EXIT_OK
    except (InfeasibleObservablesError, NonIdentifiedError) as exc:
        out["error"] = str(exc)
        status = EXIT_DATA
    if args.check_uniqueness:
        rep = check_uniqueness(obs, step=args.grid_step)
        out["uniqueness"] = {
            "step": rep.step, "tol": rep.tol, "n_hits": rep.n_hits,
            "n_clusters": rep.n_clusters, "unique": rep.unique,
            "clusters": [{"center": list(c.center), "size": c.size,
                          "diameter_steps": c.diameter_steps,
                          "min_residual": c.min_residual} for c in rep.clusters],
        }
    text = json.dumps(out, indent=2, default=float)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadowmnar",
        description="Outcome-mean estimation under nonignorable missingness "
                    "with a shadow variable")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the Monte Carlo study grid")
    sim.add_argument("--scenario", default="all", choices=[*SCENARIOS, "all"])
    sim.add_argument("--n", type=int, default=500, help="sample size (if --sizes absent)")
    sim.add_argument("--sizes", type=_int_list, default=None,
                     help="comma-separated sample sizes, e.g. 500,1500")
    sim.add_argument("--reps", type=int, required=True)
    sim.add_argument("--methods", type=_method_list, default=["dr", "ipw", "reg"])
    sim.add_argument("--seed", type=int, default=20230815)
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--level", type=float, default=0.95)
    sim.add_argument("--no-figures", action="store_true")
    sim.add_argument("--out", required=True)

    est = sub.add_parser("estimate", help="estimate from a CSV dataset")
    est.add_argument("--config", help="JSON file of RunConfig fields; flags override")
    est.add_argument("--data")
    est.add_argument("--outcome")
    est.add_argument("--shadow")
    est.add_argument("--covariates", type=_str_list)
    est.add_argument("--missing-indicator", dest="missing_indicator")
    est.add_argument("--na-token", dest="na_token")
    est.add_argument("--propensity-design", dest="propensity_design")
    est.add_argument("--outcome-design", dest="outcome_design")
    est.add_argument("--shadow-design", dest="shadow_design")
    est.add_argument("--h-design", dest="h_design")
    est.add_argument("--methods", type=_str_list)
    est.add_argument("--level", type=float)
    est.add_argument("--reg-observed-y", dest="reg_observed_y", action="store_true",
                     default=None)
    est.add_argument("--out")

    idb = sub.add_parser("identify-binary",
                         help="recover the binary joint law from observed cells")
    idb.add_argument("--r1", type=_float_list, required=True, metavar="Z0Y0,Z0Y1,Z1Y0,Z1Y1",
                     help="complete-case cells P(z,y,r=1) in z-major order")
    idb.add_argument("--r0", type=_float_list, required=True, metavar="Z0,Z1",
                     help="nonrespondent cells P(z,r=0)")
    idb.add_argument("--counts", action="store_true",
                     help="interpret inputs as counts and normalize")
    idb.add_argument("--check-uniqueness", action="store_true")
    idb.add_argument("--grid-step", type=float, default=0.05,
                 help="scan resolution; cost grows as step^-5")
    idb.add_argument("--out")
    return parser


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _method_list(text: str) -> list[str]:
    return [Method(t.strip().lower()).value for t in text.split(",") if t.strip()]


def _build_run_config(args) -> RunConfig:
    fields = ["data", "outcome", "shadow", "covariates", "missing_indicator",
              "na_token", "propensity_design", "outcome_design", "shadow_design",
              "h_design", "methods", "level", "reg_observed_y", "out"]
    merged: dict = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ConfigError(f"no such config file: {cfg_path}")
        try:
            merged.update(json.loads(cfg_path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {cfg_path}: {exc}") from exc
        unknown = set(merged) - set(fields)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for f in fields:
        v = getattr(args, f, None)
        if v is not None:
            merged[f] = v
    for required in ("data", "outcome", "shadow", "covariates", "out"):
        if not merged.get(required):
            raise ConfigError(f"missing required option --{required.replace('_', '-')}")
    if isinstance(merged.get("covariates"), str):
        merged["covariates"] = _str_list(merged["covariates"])
    if isinstance(merged.get("methods"), str):
        merged["methods"] = _str_list(merged["methods"])
    return RunConfig(**merged)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the config-error code
        return int(exc.code) if exc.code else 0
    try:
        if args.command == "simulate":
            return run_simulate(args)
        if args.command == "estimate":
            cfg = _build_run_config(args)
            return run_estimate(cfg)
        if args.command == "identify-binary":
            return run_identify_binary(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
