"""Dataset container for an outcome observed through a missingness filter.

Covariates and the shadow variable must be fully observed; the outcome is
recorded only where the response indicator is 1. Generated datasets may
carry the pre-deletion outcome in a separate oracle column used exclusively
for validating simulations, never by estimators.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Structurally invalid dataset (lengths, incomplete required columns)."""


@dataclass(frozen=True)
class ShadowDataset:
    covariates: dict[str, np.ndarray]
    z: np.ndarray
    r: np.ndarray
    y: np.ndarray
    y_oracle: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        r = np.asarray(self.r)
        y = np.asarray(self.y, dtype=float)
        n = len(r)
        if len(z) != n or len(y) != n:
            raise DataError("z, r, y must have equal length")
        if not np.all((r == 0) | (r == 1)):
            raise DataError("response indicator must be 0/1")
        r = r.astype(np.int8)
        if not np.all(np.isfinite(z)):
            raise DataError("shadow variable must be fully observed")
        if np.any(~np.isfinite(y[r == 1])):
            raise DataError("outcome must be observed where r == 1")
        y = y.copy()
        y[r == 0] = np.nan
        cov = {}
        for name, col in self.covariates.items():
            col = np.asarray(col, dtype=float)
            if len(col) != n:
                raise DataError(f"covariate {name!r} has wrong length")
            if not np.all(np.isfinite(col)):
                raise DataError(f"covariate {name!r} must be fully observed")
            cov[name] = col
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "y", y)
        if self.y_oracle is not None:
            yo = np.asarray(self.y_oracle, dtype=float)
            if len(yo) != n or not np.all(np.isfinite(yo)):
                raise DataError("oracle outcome column must be complete")
            object.__setattr__(self, "y_oracle", yo)

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def n_complete(self) -> int:
        return int(self.r.sum())

    @property
    def missing_fraction(self) -> float:
        return 1.0 - self.n_complete / self.n

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return tuple(self.covariates)

    def cols(self) -> dict[str, np.ndarray]:
        """Column mapping for design construction (covariates only)."""
        return dict(self.covariates)

    @property
    def y_filled(self) -> np.ndarray:
        """Outcome with missing entries replaced by 0; safe only inside
        r-masked expressions."""
        return np.where(self.r == 1, self.y, 0.0)

    def take(self, idx: np.ndarray) -> "ShadowDataset":
        """Row subset / reorder."""
        return ShadowDataset(
            covariates={k: v[idx] for k, v in self.covariates.items()},
            z=self.z[idx],
            r=self.r[idx],
            y=self.y[idx],
            y_oracle=None if self.y_oracle is None else self.y_oracle[idx],
        )

    def without_oracle(self) -> "ShadowDataset":
        return replace(self, y_oracle=None)

    def to_csv(self, path: str | Path) -> None:
        """Write the canonical CSV schema: covariates, z, y, r, (y_oracle).

        Missing outcomes are written as empty fields. Floats are written
        with round-trip precision so a re-ingested file is field-identical.
        """
        path = Path(path)
        header = list(self.covariates) + ["z", "y", "r"]
        if self.y_oracle is not None:
            header.append("y_oracle")
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(self.n):
                row = [_fmt(self.covariates[c][i]) for c in self.covariates]
                row.append(_fmt(self.z[i]))
                row.append(_fmt(self.y[i]) if self.r[i] == 1 else "")
                row.append(str(int(self.r[i])))
                if self.y_oracle is not None:
                    row.append(_fmt(self.y_oracle[i]))
                w.writerow(row)


def _fmt(v: float) -> str:
    return repr(float(v))
