"""Two-way fixed-effects baseline.

With two periods, the TWFE regression of outcome on unit and period fixed
effects plus the treatment collapses, after first-differencing, to a
weighted regression of the outcome change on an intercept and the treatment
change.  Standard errors are heteroskedasticity-robust with the HC1
small-sample factor; one differenced observation per unit makes this the
same thing as clustering by unit.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateRegressor, TooFewUnits
from .panel import DifferencedSample
from .results import ThetaEstimate, wald_ci, weighted_mean


def estimate_twfe(sample: DifferencedSample, level: float = 0.95) -> ThetaEstimate:
    """Weighted OLS slope of dy on (1, dd) with robust inference.

    Raises :class:`DegenerateRegressor` when dd has no weighted variance.
    """
    if sample.n < 2:
        raise TooFewUnits("TWFE needs at least 2 units")
    w = sample.weight
    X = np.column_stack([np.ones(sample.n), sample.dd])

    if weighted_var_dd(sample) <= 0:
        raise DegenerateRegressor("treatment change is constant under the weights")
    xtwx = X.T @ (X * w[:, None])
    xtwx_inv = np.linalg.inv(xtwx)
    beta = xtwx_inv @ (X.T @ (w * sample.dy))
    resid = sample.dy - X @ beta

    # HC1 sandwich, unit-level: meat uses squared weights
    meat = (X * (w**2 * resid**2)[:, None]).T @ X
    factor = sample.n / (sample.n - 2) if sample.n > 2 else 1.0
    vcov = xtwx_inv @ meat @ xtwx_inv * factor
    se = float(np.sqrt(max(vcov[1, 1], 0.0)))

    # per-unit influence of the slope coordinate (informational)
    a_inv = xtwx_inv * w.sum()
    psi = (X @ a_inv[:, 1]) * resid

    theta_hat = float(beta[1])
    return ThetaEstimate(
        theta_hat=theta_hat,
        se=se,
        ci=wald_ci(theta_hat, se, level),
        level=level,
        n=sample.n,
        estimator_tag="twfe",
        psi=psi,
        n_dropped=sample.n_dropped,
        diagnostics={"intercept": float(beta[0])},
    )


def weighted_var_dd(sample: DifferencedSample) -> float:
    m = weighted_mean(sample.dd, sample.weight)
    return float(np.sum(sample.weight * (sample.dd - m) ** 2) / sample.weight.sum())
