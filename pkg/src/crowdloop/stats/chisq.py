"""Chi-square tests with Cramer's V effect size.

Goodness-of-fit (default expected = uniform, df = k-1, V = sqrt(X2/(n(k-1))))
and independence on an r x c table (expected from margins, df = (r-1)(c-1),
V = sqrt(X2/(n min(r-1, c-1)))).  Upper-tail p-values come from the
regularized incomplete gamma function in ``_special``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._special import chi2_sf

MODES = ("goodness_of_fit", "independence")


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    p_value: float
    cramers_v: float
    mode: str
    n: int
    observed: tuple
    expected: tuple

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "cramers_v": self.cramers_v,
            "mode": self.mode,
            "n": self.n,
            "observed": list(self.observed),
            "expected": list(self.expected),
        }


def _check_expected(expected: np.ndarray) -> None:
    bad = np.argwhere(expected <= 0)
    if bad.size:
        cell = tuple(int(i) for i in bad[0])
        raise StatsError(f"expected count must be positive; cell {cell} is {expected[tuple(bad[0])]}")


def chi_square(
    observed: Sequence,
    expected: Optional[Sequence] = None,
    mode: str = "goodness_of_fit",
) -> ChiSquareResult:
    """Pearson chi-square; ``observed`` is a 1-D count vector for
    goodness-of-fit or a 2-D table for independence."""
    if mode not in MODES:
        raise StatsError(f"unknown mode {mode!r}; expected one of {MODES}")
    obs = np.asarray(observed, dtype=float)

    if mode == "goodness_of_fit":
        if obs.ndim != 1 or obs.size < 2:
            raise StatsError("goodness-of-fit needs a 1-D vector of at least 2 counts")
        n = float(obs.sum())
        if n <= 0:
            raise StatsError("observed counts sum to zero")
        if expected is None:
            exp = np.full(obs.shape, n / obs.size)
        else:
            exp = np.asarray(expected, dtype=float)
            if exp.shape != obs.shape:
                raise StatsError(f"expected shape {exp.shape} != observed shape {obs.shape}")
        _check_expected(exp)
        stat = float(((obs - exp) ** 2 / exp).sum())
        df = obs.size - 1
        v = float(np.sqrt(stat / (n * df)))
    else:
        if obs.ndim != 2 or min(obs.shape) < 2:
            raise StatsError("independence needs a table with at least 2 rows and 2 columns")
        n = float(obs.sum())
        if n <= 0:
            raise StatsError("observed counts sum to zero")
        row = obs.sum(axis=1, keepdims=True)
        col = obs.sum(axis=0, keepdims=True)
        exp = row @ col / n
        _check_expected(exp)
        stat = float(((obs - exp) ** 2 / exp).sum())
        r, c = obs.shape
        df = (r - 1) * (c - 1)
        v = float(np.sqrt(stat / (n * min(r - 1, c - 1))))

    return ChiSquareResult(
        statistic=stat,
        df=df,
        p_value=chi2_sf(stat, df),
        cramers_v=min(1.0, v),
        mode=mode,
        n=int(round(n)),
        observed=tuple(np.asarray(observed).ravel().tolist()),
        expected=tuple(np.round(exp.ravel(), 10).tolist()),
    )
