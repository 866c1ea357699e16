"""Two-step parametric estimator of the average switcher slope.

Step one fits, by weighted least squares, a polynomial family for the
conditional mean of the outcome change given baseline treatment and
treatment change,

    E[dy | d1, dd] = trend(d1) + dd * avg_slope(d1, dd),

where ``trend`` is a polynomial in ``d1`` of degree ``q_t`` and
``avg_slope`` is a polynomial with degree ``q_s1`` in ``d1`` and ``q_s2``
in ``dd``.  Step two removes the fitted counterfactual trend at zero
treatment change from each switcher's outcome evolution and rescales:

    theta_hat = sum_i w_i s_i (dy_i - g(d1_i, 0)) / sum_i w_i |dd_i|.

The reported variance is the plug-in variance of the per-unit influence
values, which account for the first-step estimation error through the
least-squares influence ``xi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDenominator, RankDeficientDesign, TooFewUnits
from .panel import DifferencedSample
from .results import (
    ThetaEstimate,
    effective_n,
    wald_ci,
    weighted_mean,
    weighted_var,
)

SV_RTOL = 1e-10  # relative singular-value cutoff for rank checks


@dataclass(frozen=True)
class GSpec:
    """Polynomial family for the conditional outcome-change surface.

    ``trend_degree`` is the degree in ``d1`` of the zero-change trend;
    ``slope_d1_degree`` and ``slope_dd_degree`` are the degrees of the
    average-slope polynomial in ``d1`` and ``dd``.  The regressor vector is

        [1, d1, .., d1^qt,  dd, dd*d1, .., dd*d1^qs1,  dd^2, .., dd^(qs2+1)]

    so the plain ``dd`` term appears exactly once and every slope-block
    entry vanishes at ``dd = 0``.  The default (1, 1, 1) is the
    five-parameter family  l1 + l2*d1 + l3*dd + l4*dd*d1 + l5*dd^2.
    """

    trend_degree: int = 1
    slope_d1_degree: int = 1
    slope_dd_degree: int = 1

    def __post_init__(self):
        for name in ("trend_degree", "slope_d1_degree", "slope_dd_degree"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 0):
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")

    @property
    def n_trend(self) -> int:
        return self.trend_degree + 1

    @property
    def n_params(self) -> int:
        return self.trend_degree + self.slope_d1_degree + self.slope_dd_degree + 2

    @property
    def labels(self) -> tuple[str, ...]:
        trend = ["1"] + [f"d1^{j}" if j > 1 else "d1" for j in range(1, self.trend_degree + 1)]
        slope = ["dd"] + [
            f"dd*d1^{j}" if j > 1 else "dd*d1" for j in range(1, self.slope_d1_degree + 1)
        ]
        slope += [f"dd^{k + 1}" for k in range(1, self.slope_dd_degree + 1)]
        return tuple(trend + slope)

    def design(self, d1: np.ndarray, dd: np.ndarray) -> np.ndarray:
        """Regressor matrix, one row per unit, ``n_params`` columns."""
        d1 = np.asarray(d1, dtype=float)
        dd = np.asarray(dd, dtype=float)
        cols = [d1**j for j in range(self.trend_degree + 1)]
        cols += [dd * d1**j for j in range(self.slope_d1_degree + 1)]
        cols += [dd ** (k + 1) for k in range(1, self.slope_dd_degree + 1)]
        return np.column_stack(cols)

    def trend_design(self, d1: np.ndarray) -> np.ndarray:
        """Trend-block columns only: the regressor at ``dd = 0``."""
        d1 = np.asarray(d1, dtype=float)
        return np.column_stack([d1**j for j in range(self.trend_degree + 1)])

    def nests(self, other: "GSpec") -> bool:
        """True if this family's regressor set contains ``other``'s."""
        return (
            self.trend_degree >= other.trend_degree
            and self.slope_d1_degree >= other.slope_d1_degree
            and self.slope_dd_degree >= other.slope_dd_degree
        )


@dataclass(frozen=True)
class ParametricFit:
    """Weighted least-squares fit of a :class:`GSpec` family.

    ``xi`` holds per-unit first-step influence values: the fitted
    coefficients satisfy ``lambda_hat - lambda0 ~ weighted mean of xi``.
    ``xtx_inv`` is the inverse of the weight-normalized Gram matrix.
    """

    gspec: GSpec
    lambda_hat: np.ndarray
    xtx_inv: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("lambda_hat", "xtx_inv", "residuals", "xi"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def fit_first_step(sample: DifferencedSample, gspec: GSpec) -> ParametricFit:
    """Fit the conditional-mean family by weighted least squares.

    Solves ``min_l sum_i w_i (dy_i - x_i'l)^2`` through the SVD of the
    square-root-weighted design.  Raises :class:`TooFewUnits` when there are
    fewer units than parameters and :class:`RankDeficientDesign` when the
    smallest singular value falls below ``1e-10`` times the largest.
    """
    p = gspec.n_params
    if sample.n < p:
        raise TooFewUnits(f"need at least {p} units to fit {p} parameters, have {sample.n}")

    X = gspec.design(sample.d1, sample.dd)
    w = sample.weight
    sw = np.sqrt(w)
    B = X * sw[:, None]
    u, sv, vt = np.linalg.svd(B, full_matrices=False)
    if sv[0] == 0 or sv[-1] < SV_RTOL * sv[0]:
        raise RankDeficientDesign(float(sv[-1]), float(sv[0]), SV_RTOL)

    lambda_hat = vt.T @ ((u.T @ (sample.dy * sw)) / sv)
    residuals = sample.dy - X @ lambda_hat

    # (sum_j w_j x_j x_j' / sum_j w_j)^{-1}, from the same SVD
    total_w = w.sum()
    xtx_inv = (vt.T * (total_w / sv**2)) @ vt
    xi = (X @ xtx_inv) * residuals[:, None]

    return ParametricFit(
        gspec=gspec, lambda_hat=lambda_hat, xtx_inv=xtx_inv, residuals=residuals, xi=xi
    )


def g_at_zero(fit: ParametricFit, d1) -> np.ndarray:
    """Fitted conditional mean at zero treatment change, ``g(d1, 0)``.

    Only the trend block contributes; the slope block vanishes identically.
    """
    scalar = np.isscalar(d1)
    X0 = fit.gspec.trend_design(np.atleast_1d(np.asarray(d1, dtype=float)))
    g0 = X0 @ fit.lambda_hat[: fit.gspec.n_trend]
    return float(g0[0]) if scalar else g0


def estimate_theta_parametric(
    sample: DifferencedSample, fit: ParametricFit, level: float = 0.95
) -> ThetaEstimate:
    """Second step: the slope estimate with influence-function inference.

    ``theta_hat`` is the weighted mean of ``s * (dy - g(d1, 0))`` divided by
    the weighted mean of ``|dd|``.  Per-unit influence values are

        psi_i = [ s_i (dy_i - g(d1_i,0)) - G'xi_i - theta_hat |dd_i| ] / m

    with ``m`` the weighted mean of ``|dd|`` and ``G`` the weighted mean of
    ``s_i`` times the regressor gradient at ``dd = 0``; the standard error
    is the weighted standard deviation of ``psi`` over the square root of
    the effective sample size.
    """
    w = sample.weight
    abs_dd = np.abs(sample.dd)
    m_dd = weighted_mean(abs_dd, w)
    if not m_dd > 0:
        raise DegenerateDenominator("weighted mean of |dd| is zero")

    g0 = g_at_zero(fit, sample.d1)
    dev = sample.s * (sample.dy - g0)
    theta_hat = weighted_mean(dev, w) / m_dd

    # gradient of the family at dd = 0: trend columns, zero slope block
    p = fit.gspec.n_params
    grad0 = np.zeros((sample.n, p))
    grad0[:, : fit.gspec.n_trend] = fit.gspec.trend_design(sample.d1)
    G = np.sum(w[:, None] * sample.s[:, None] * grad0, axis=0) / w.sum()

    psi = (dev - fit.xi @ G - theta_hat * abs_dd) / m_dd
    se = float(np.sqrt(weighted_var(psi, w) / effective_n(w)))

    return ThetaEstimate(
        theta_hat=float(theta_hat),
        se=se,
        ci=wald_ci(theta_hat, se, level),
        level=level,
        n=sample.n,
        estimator_tag="parametric",
        psi=psi,
        n_dropped=sample.n_dropped,
        diagnostics={
            "family": {
                "q_t": fit.gspec.trend_degree,
                "q_s1": fit.gspec.slope_d1_degree,
                "q_s2": fit.gspec.slope_dd_degree,
            },
            "lambda_hat": [float(v) for v in fit.lambda_hat],
        },
    )
