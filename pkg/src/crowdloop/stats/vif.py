"""Variance inflation factors.

VIF_j = 1 / (1 - R^2_j) from regressing column j on the remaining columns.
The auxiliary R^2 uses the centered total sum of squares when the remaining
columns span a constant (they contain an intercept, explicitly or through a
constant column) and the uncentered total otherwise -- the convention of
standard VIF tooling, and the only one under which an always-on indicator
column (which acts as the intercept) gets a finite, meaningful value.
Exact collinearity is reported as ``inf`` for the involved columns.
"""

from __future__ import annotations

import numpy as np

from .chisq import StatsError

_R2_ONE = 1.0 - 1e-12


def vif(design) -> list[float]:
    X = np.asarray(design, dtype=float)
    if X.ndim != 2:
        raise StatsError("design must be a 2-D matrix")
    n, p = X.shape
    if n <= p:
        raise StatsError(f"need more observations than columns (n={n}, p={p})")
    if p < 2:
        raise StatsError("VIF needs at least two columns")
    if not np.all(np.isfinite(X)):
        raise StatsError("design must be finite")

    ones = np.ones(n)
    out: list[float] = []
    for j in range(p):
        yj = X[:, j]
        others = np.delete(X, j, axis=1)
        norm = float(yj @ yj)
        if norm == 0.0:
            raise StatsError(f"column {j} is identically zero")
        coef, *_ = np.linalg.lstsq(others, yj, rcond=None)
        resid = yj - others @ coef
        ss_res = float(resid @ resid)

        w, *_ = np.linalg.lstsq(others, ones, rcond=None)
        spans_const = bool(np.allclose(others @ w, ones, atol=1e-8))
        if spans_const:
            ss_tot = float(np.sum((yj - yj.mean()) ** 2))
            if ss_tot == 0.0:
                # constant column regressed on a design that already has an
                # intercept: perfectly explained
                out.append(float("inf"))
                continue
        else:
            ss_tot = norm
        r2 = 1.0 - ss_res / ss_tot
        out.append(float("inf") if r2 >= _R2_ONE else 1.0 / (1.0 - r2))
    return out
