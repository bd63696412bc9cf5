"""Design-matrix construction from a small declarative term grammar.

User-facing formulas are comma-separated tokens limited to raw columns
("x"), squares ("x^2") and pairwise products ("a*b"); an intercept is
implied. Scenario truths additionally use internal fixed-weight polynomial
terms, which the parser never produces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

# Term encodings:
#   ("const",)                       -> 1
#   ("lin", col)                     -> col
#   ("sq", col)                      -> col**2
#   ("prod", a, b)                   -> a * b
#   ("poly", col, ((pow, w), ...))   -> sum_k w_k * col**pow_k  (internal)
Term = tuple

_TOKEN_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\^\s*2|\*\s*([A-Za-z_][A-Za-z0-9_]*))?\s*$")


class DesignError(ValueError):
    """Malformed design formula or a term referencing a missing column."""


def term_name(term: Term) -> str:
    kind = term[0]
    if kind == "const":
        return "1"
    if kind == "lin":
        return term[1]
    if kind == "sq":
        return f"{term[1]}^2"
    if kind == "prod":
        return f"{term[1]}*{term[2]}"
    if kind == "poly":
        body = " + ".join(f"{w:g}*{term[1]}^{p}" for p, w in term[2])
        return f"({body})"
    raise DesignError(f"unknown term kind {kind!r}")


@dataclass(frozen=True)
class DesignSpec:
    """Ordered tuple of terms mapping named columns to a design matrix."""

    terms: tuple[Term, ...]

    @property
    def dim(self) -> int:
        return len(self.terms)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(term_name(t) for t in self.terms)

    def column_names(self) -> set[str]:
        """Raw column names referenced by any term."""
        out: set[str] = set()
        for t in self.terms:
            if t[0] in ("lin", "sq", "poly"):
                out.add(t[1])
            elif t[0] == "prod":
                out.update((t[1], t[2]))
        return out

    def build(self, cols: Mapping[str, np.ndarray]) -> np.ndarray:
        """Evaluate the terms on equal-length columns, returning (n, dim)."""
        missing = sorted(self.column_names() - set(cols))
        if missing:
            raise DesignError(f"design references missing columns: {missing}")
        n = len(next(iter(cols.values()))) if cols else 0
        out = np.empty((n, self.dim))
        for j, t in enumerate(self.terms):
            kind = t[0]
            if kind == "const":
                out[:, j] = 1.0
            elif kind == "lin":
                out[:, j] = cols[t[1]]
            elif kind == "sq":
                out[:, j] = np.square(cols[t[1]])
            elif kind == "prod":
                out[:, j] = cols[t[1]] * cols[t[2]]
            elif kind == "poly":
                v = np.asarray(cols[t[1]], dtype=float)
                acc = np.zeros(n)
                for p, w in t[2]:
                    acc += w * v**p
                out[:, j] = acc
            else:
                raise DesignError(f"unknown term kind {kind!r}")
        return out

    @classmethod
    def parse(cls, text: str, *, intercept: bool = True) -> "DesignSpec":
        """Parse a comma-separated formula, e.g. ``"x, x^2, ltm*urban"``.

        An intercept term is prepended unless ``intercept=False`` or the
        token ``1`` appears explicitly.
        """
        terms: list[Term] = []
        for raw in text.split(","):
            tok = raw.strip()
            if not tok:
                continue
            if tok == "1":
                if ("const",) not in terms:
                    terms.insert(0, ("const",))
                continue
            m = _TOKEN_RE.match(tok)
            if not m:
                raise DesignError(f"cannot parse design term {tok!r}")
            name, other = m.group(1), m.group(2)
            if other is not None:
                terms.append(("prod", name, other))
            elif "^" in tok:
                terms.append(("sq", name))
            else:
                terms.append(("lin", name))
        if intercept and ("const",) not in terms:
            terms.insert(0, ("const",))
        if not terms:
            raise DesignError("empty design formula")
        return cls(tuple(terms))


def linear(*columns: str) -> DesignSpec:
    """Intercept plus the raw columns, in order."""
    return DesignSpec((("const",),) + tuple(("lin", c) for c in columns))


def with_square(column: str) -> DesignSpec:
    """Intercept plus the squared column (shadow-model default in the study)."""
    return DesignSpec((("const",), ("sq", column)))
