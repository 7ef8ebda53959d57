"""Negative-binomial regression by maximum likelihood.

Log link, NB2 parameterization: Var(y) = mu + mu^2/theta with theta the
dispersion (reported on every fit so alternate conventions can convert).
The fit alternates iteratively-reweighted least squares for the
coefficients with a one-dimensional profile-likelihood update for theta;
step-halving on the IRLS update keeps the log-likelihood non-decreasing
across outer iterations, which the fit records and asserts.  Wald p-values
use standard errors from the observed information matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chisq import StatsError
from ._special import lgamma_vec, normal_sf

_MU_FLOOR = 1e-10
_ETA_CLIP = 30.0


@dataclass
class NbFit:
    coefficients: np.ndarray
    dispersion: float
    log_likelihood: float
    rate_ratios: np.ndarray
    std_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    ll_trace: list[float] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.tolist(),
            "dispersion": self.dispersion,
            "log_likelihood": self.log_likelihood,
            "rate_ratios": self.rate_ratios.tolist(),
            "std_errors": self.std_errors.tolist(),
            "z_values": self.z_values.tolist(),
            "p_values": self.p_values.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
        }


def nb_loglik(y: np.ndarray, mu: np.ndarray, theta: float) -> float:
    mu = np.maximum(mu, _MU_FLOOR)
    ll = (
        lgamma_vec(y + theta)
        - math.lgamma(theta)
        - lgamma_vec(y + 1.0)
        + theta * math.log(theta)
        + y * np.log(mu)
        - (theta + y) * np.log(theta + mu)
    )
    return float(ll.sum())


def _mu(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    eta = np.clip(X @ beta, -_ETA_CLIP, _ETA_CLIP)
    return np.exp(eta)


def _irls(X, y, beta, theta, ll_current, max_iter=50):
    """IRLS for beta at fixed theta, with step-halving so ll never drops."""
    for _ in range(max_iter):
        mu = _mu(X, beta)
        w = mu * theta / (theta + mu)
        eta = np.log(np.maximum(mu, _MU_FLOOR))
        z = eta + (y - mu) / np.maximum(mu, _MU_FLOOR)
        Xw = X * w[:, None]
        try:
            beta_new = np.linalg.solve(X.T @ Xw, Xw.T @ z)
        except np.linalg.LinAlgError as exc:
            raise StatsError(f"singular IRLS system (separation or collinearity): {exc}") from exc
        step = beta_new - beta
        ll_new = nb_loglik(y, _mu(X, beta + step), theta)
        halvings = 0
        while ll_new < ll_current - 1e-12 and halvings < 25:
            step *= 0.5
            ll_new = nb_loglik(y, _mu(X, beta + step), theta)
            halvings += 1
        if ll_new < ll_current - 1e-12:
            break  # no improving step; leave beta unchanged
        beta = beta + step
        improved = ll_new - ll_current
        ll_current = ll_new
        if np.max(np.abs(step)) < 1e-10 or improved < 1e-12:
            break
    return beta, ll_current


def _update_theta(X, y, beta, theta, lo=1e-4, hi=1e6):
    """Golden-section maximization of the profile likelihood in log(theta);
    returns the better of the search optimum and the current value."""
    mu = _mu(X, beta)
    f = lambda lt: nb_loglik(y, mu, math.exp(lt))
    a, b = math.log(lo), math.log(hi)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if b - a < 1e-10:
            break
    cand = math.exp((a + b) / 2.0)
    return cand if nb_loglik(y, mu, cand) > nb_loglik(y, mu, theta) else theta


def nb_regression(
    design,
    y,
    tol: float = 1e-8,
    max_outer: int = 100,
) -> NbFit:
    """Fit counts ~ NB(mu = exp(X beta), theta) by maximum likelihood.

    Requires n > p and a design that already includes its intercept column.
    Non-convergence is reported on the result (``converged=False`` plus a
    message), never silently.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise StatsError("design must be a 2-D matrix")
    n, p = X.shape
    if n <= p:
        raise StatsError(f"need more observations than parameters (n={n}, p={p})")
    if y.shape != (n,):
        raise StatsError(f"y must have length {n}")
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise StatsError("y must hold non-negative integer counts")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise StatsError("design and response must be finite")

    # Poisson-flavored start: log(y+0.5) least squares for beta, moments for theta.
    beta, *_ = np.linalg.lstsq(X, np.log(y + 0.5), rcond=None)
    m, v = float(y.mean()), float(y.var())
    theta = (m * m / (v - m)) if v > m else 10.0
    theta = float(min(max(theta, 1e-3), 1e5))

    ll = nb_loglik(y, _mu(X, beta), theta)
    trace = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, max_outer + 1):
        beta, ll = _irls(X, y, beta, theta, ll)
        theta = _update_theta(X, y, beta, theta)
        ll = nb_loglik(y, _mu(X, beta), theta)
        if ll < trace[-1] - 1e-9:
            raise StatsError("log-likelihood decreased across an outer iteration")
        trace.append(ll)
        if abs(trace[-1] - trace[-2]) < tol * (abs(trace[-2]) + 1.0):
            converged = True
            break

    mu = _mu(X, beta)
    # Observed information for beta: sum theta*mu*(theta+y)/(theta+mu)^2 x x'
    w_obs = theta * mu * (theta + y) / (theta + mu) ** 2
    info = X.T @ (X * w_obs[:, None])
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        se = np.full(p, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.nan)
    pvals = np.array([2.0 * normal_sf(abs(zi)) if np.isfinite(zi) else np.nan for zi in z])

    return NbFit(
        coefficients=beta,
        dispersion=theta,
        log_likelihood=ll,
        rate_ratios=np.exp(beta),
        std_errors=se,
        z_values=z,
        p_values=pvals,
        converged=converged,
        iterations=iterations,
        ll_trace=trace,
        message="" if converged else f"no convergence within {max_outer} outer iterations",
    )
