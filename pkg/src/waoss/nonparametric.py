"""Nonparametric estimation of the average switcher slope.

The conditional mean g(d1, dd) = E[dy | d1, dd] is estimated by a bivariate
local-linear fit with a product kernel.  Evaluating at dd = 0 along every
unit's baseline treatment and averaging the signed values (marginal
integration over the empirical d1 distribution) gives the counterfactual
trend term

    zeta_hat = sum_i w_i s_i ghat(d1_i, 0) / sum_i w_i,

and the slope estimate is

    theta_hat = [ weighted mean(s * dy) - zeta_hat ] / weighted mean(|dd|).

Inference is by resampling units; there is no closed-form variance for the
marginally integrated fit.  A fixed-window quasi-stayer estimator of the
trend term (kernel regression of dy on d1 over the subsample with
|dd| <= eta) is also provided; its bias shrinks with the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegenerateDenominator, NoKernelMass, NoQuasiStayers, TooFewUnits
from .panel import DifferencedSample
from .results import ThetaEstimate, weighted_mean, weighted_var

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# relative eigenvalue cutoff below which a local plane fit is declared
# singular and the point falls back to a local-constant fit
_LOCAL_RTOL = 1e-10

_CHUNK_CELLS = 4_000_000  # target evaluation-matrix cells per chunk


def _kernel(name: str, u: np.ndarray) -> np.ndarray:
    if name == "epanechnikov":
        out = 1.0 - u * u
        np.maximum(out, 0.0, out=out)
        out *= 0.75
        return out
    if name == "gaussian":
        return np.exp(-0.5 * u * u) / _SQRT_2PI
    raise ValueError(f"unknown kernel {name!r}")


def _kernel_support(name: str) -> float:
    """Half-width outside which the kernel is exactly zero (inf if none)."""
    return 1.0 if name == "epanechnikov" else math.inf


@dataclass(frozen=True)
class BandwidthConfig:
    """Bandwidths and kernel for the bivariate local-linear fit.

    ``h_d1`` and ``h_dd`` are either positive numbers or a rule name:
    'silverman' scales 1.06 * weighted sd * n^(-1/6) (the bivariate
    rule of thumb); ``h_dd`` additionally accepts 'cv' for leave-one-out
    cross-validation around the rule of thumb.  The dd-direction rule is
    shrunk by ``n^(-undersmooth_exponent)`` so that the plugged-in marginal
    integration is not first-order biased by smoothing at dd = 0.
    """

    h_d1: Union[float, str] = "silverman"
    h_dd: Union[float, str] = "silverman"
    kernel: str = "epanechnikov"
    undersmooth_exponent: float = 0.05

    def __post_init__(self):
        if self.kernel not in ("epanechnikov", "gaussian"):
            raise ValueError(f"kernel must be 'epanechnikov' or 'gaussian', got {self.kernel!r}")
        for name, rules in (("h_d1", ("silverman",)), ("h_dd", ("silverman", "cv"))):
            v = getattr(self, name)
            if isinstance(v, str):
                if v not in rules:
                    raise ValueError(f"{name} rule must be one of {rules}, got {v!r}")
            elif not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if not (self.undersmooth_exponent >= 0):
            raise ValueError("undersmooth_exponent must be >= 0")

    def resolve(self, sample: DifferencedSample) -> tuple[float, float]:
        """Concrete (h_d1, h_dd) for a sample."""
        n = sample.n
        rot = lambda x: 1.06 * math.sqrt(weighted_var(x, sample.weight)) * n ** (-1.0 / 6.0)
        h1 = self.h_d1 if not isinstance(self.h_d1, str) else rot(sample.d1)
        if isinstance(self.h_dd, str):
            h2 = rot(sample.dd) * n ** (-self.undersmooth_exponent)
            if self.h_dd == "cv":
                h2 = _loo_cv_hdd(sample, h1, h2, self.kernel)
        else:
            h2 = self.h_dd
        if not (h1 > 0 and h2 > 0):
            raise ValueError("resolved bandwidths must be positive (degenerate variation?)")
        return float(h1), float(h2)


@dataclass(frozen=True)
class LocalFitResult:
    """Per-point local-linear values with fallback and mass diagnostics."""

    g: np.ndarray
    kernel_mass: np.ndarray = field(repr=False)
    fallback: np.ndarray = field(repr=False)
    bandwidths_used: tuple[float, float] = (0.0, 0.0)

    @property
    def n_fallback(self) -> int:
        return int(self.fallback.sum())


@dataclass(frozen=True)
class ZetaEstimate:
    """Marginally integrated counterfactual-trend estimate."""

    zeta_hat: float
    g_at_zero: np.ndarray = field(repr=False)
    effective_kernel_mass: np.ndarray = field(repr=False)
    bandwidths_used: tuple[float, float] = (0.0, 0.0)
    n_fallback: int = 0


def _ll_points(d1, dd, y, w, d1_eval, dd_eval, h1, h2, kernel):
    """Local-linear (intercept) fit at arbitrary evaluation points.

    Returns (g, mass, fallback).  Points whose plane fit is numerically
    singular fall back to the local-constant (Nadaraya-Watson) value;
    points with zero kernel mass raise :class:`NoKernelMass`.
    """
    n_eval = d1_eval.shape[0]
    support = _kernel_support(kernel)

    # with a compactly supported kernel and a common dd evaluation value,
    # only data inside the dd window can ever receive weight
    common_dd = dd_eval[0] if n_eval and np.all(dd_eval == dd_eval[0]) else None
    if common_dd is not None and np.isfinite(support):
        keep = np.abs(dd - common_dd) < support * h2
        d1s, dds, ys, ws = d1[keep], dd[keep], y[keep], w[keep]
    else:
        d1s, dds, ys, ws = d1, dd, y, w

    m = d1s.shape[0]
    g = np.empty(n_eval)
    mass = np.zeros(n_eval)
    fallback = np.zeros(n_eval, dtype=bool)
    if m == 0:
        raise NoKernelMass(n_eval)

    chunk = max(1, int(_CHUNK_CELLS // max(m, 1)))
    for lo in range(0, n_eval, chunk):
        hi = min(lo + chunk, n_eval)
        u = (d1_eval[lo:hi, None] - d1s[None, :]) / h1
        k = _kernel(kernel, u)
        if common_dd is not None:
            v_row = (dds - common_dd) / h2
            k *= (_kernel(kernel, v_row) * ws)[None, :]
            v = np.broadcast_to(v_row, u.shape)
        else:
            v = (dd_eval[lo:hi, None] - dds[None, :]) / h2
            k *= _kernel(kernel, v)
            k *= ws[None, :]

        ku = k * u
        kv = k * v
        s00 = k.sum(axis=1)
        s10 = ku.sum(axis=1)
        s01 = kv.sum(axis=1)
        s20 = (ku * u).sum(axis=1)
        s11 = (ku * v).sum(axis=1)
        s02 = (kv * v).sum(axis=1)
        t0 = k @ ys
        t1 = ku @ ys
        t2 = kv @ ys

        M = np.empty((hi - lo, 3, 3))
        M[:, 0, 0] = s00
        M[:, 0, 1] = M[:, 1, 0] = s10
        M[:, 0, 2] = M[:, 2, 0] = s01
        M[:, 1, 1] = s20
        M[:, 1, 2] = M[:, 2, 1] = s11
        M[:, 2, 2] = s02
        t = np.stack([t0, t1, t2], axis=1)

        eig = np.linalg.eigvalsh(M)
        ok = (s00 > 0) & (eig[:, 0] > _LOCAL_RTOL * np.maximum(eig[:, 2], 1e-300))
        gc = np.empty(hi - lo)
        if ok.any():
            sol = np.linalg.solve(M[ok], t[ok])
            gc[ok] = sol[:, 0]
        nw = ~ok & (s00 > 0)
        gc[nw] = t0[nw] / s00[nw]
        gc[s00 <= 0] = np.nan

        g[lo:hi] = gc
        mass[lo:hi] = s00
        fallback[lo:hi] = nw

    if np.any(mass <= 0):
        raise NoKernelMass(int((mass <= 0).sum()))
    return g, mass, fallback


def local_linear_g(
    sample: DifferencedSample, eval_points, bw: BandwidthConfig = BandwidthConfig()
) -> LocalFitResult:
    """Estimate g(d1, dd) = E[dy | d1, dd] at the given (d1, dd) points.

    ``eval_points`` is a sequence of (d1, dd) pairs.  The fit solves, at
    each point, a kernel-weighted least-squares plane in the centered
    coordinates and returns the intercept, which reproduces affine
    conditional means exactly.
    """
    if sample.n < 10:
        raise TooFewUnits("local-linear fit needs at least 10 units")
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if pts.shape[1] != 2:
        raise ValueError("eval_points must be (d1, dd) pairs")
    h1, h2 = bw.resolve(sample)
    g, mass, fb = _ll_points(
        sample.d1, sample.dd, sample.dy, sample.weight,
        pts[:, 0].copy(), pts[:, 1].copy(), h1, h2, bw.kernel,
    )
    return LocalFitResult(g=g, kernel_mass=mass, fallback=fb, bandwidths_used=(h1, h2))


def estimate_zeta(
    sample: DifferencedSample, bw: BandwidthConfig = BandwidthConfig()
) -> ZetaEstimate:
    """Signed average of the local-linear fit at zero treatment change.

    Evaluates ghat(d1_i, 0) at every unit and averages s_i * ghat with the
    unit weights (marginal integration over the empirical baseline-treatment
    distribution).
    """
    if sample.n < 10:
        raise TooFewUnits("local-linear fit needs at least 10 units")
    h1, h2 = bw.resolve(sample)
    g, mass, fb = _ll_points(
        sample.d1, sample.dd, sample.dy, sample.weight,
        sample.d1, np.zeros(sample.n), h1, h2, bw.kernel,
    )
    zeta = weighted_mean(sample.s * g, sample.weight)
    return ZetaEstimate(
        zeta_hat=float(zeta),
        g_at_zero=g,
        effective_kernel_mass=mass,
        bandwidths_used=(h1, h2),
        n_fallback=int(fb.sum()),
    )


def estimate_theta_nonparametric(
    sample: DifferencedSample,
    bw: BandwidthConfig = BandwidthConfig(),
    level: float = 0.95,
    n_boot: int = 199,
    seed: int = 0,
) -> ThetaEstimate:
    """Slope estimate with the nonparametrically estimated trend removed.

    The standard error and the percentile confidence interval come from a
    bootstrap over units with ``n_boot`` resamples; bandwidths are resolved
    once on the original sample and held fixed across resamples.  With
    ``n_boot = 0`` only the point estimate is returned (se and ci None).
    """
    if n_boot < 0:
        raise ValueError("n_boot must be >= 0")
    from .results import z_quantile  # validates the level early

    z_quantile(level)
    w = sample.weight
    m_dd = weighted_mean(np.abs(sample.dd), w)
    if not m_dd > 0:
        raise DegenerateDenominator("weighted mean of |dd| is zero")

    zres = estimate_zeta(sample, bw)
    h1, h2 = zres.bandwidths_used
    theta_hat = (weighted_mean(sample.s * sample.dy, w) - zres.zeta_hat) / m_dd

    se = None
    ci = None
    if n_boot > 0:
        boots = np.empty(n_boot)
        children = np.random.SeedSequence(seed).spawn(n_boot)
        for b in range(n_boot):
            rng = np.random.default_rng(children[b])
            idx = rng.integers(0, sample.n, size=sample.n)
            d1b, ddb, dyb, wb = sample.d1[idx], sample.dd[idx], sample.dy[idx], w[idx]
            gb, _, _ = _ll_points(d1b, ddb, dyb, wb, d1b, np.zeros(sample.n), h1, h2, bw.kernel)
            sb = np.sign(ddb)
            zeta_b = weighted_mean(sb * gb, wb)
            boots[b] = (weighted_mean(sb * dyb, wb) - zeta_b) / weighted_mean(np.abs(ddb), wb)
        se = float(np.std(boots, ddof=1)) if n_boot > 1 else 0.0
        alpha = 1.0 - level
        ci = tuple(float(q) for q in np.quantile(boots, [alpha / 2.0, 1.0 - alpha / 2.0]))

    return ThetaEstimate(
        theta_hat=float(theta_hat),
        se=se,
        ci=ci,
        level=level,
        n=sample.n,
        estimator_tag="nonparametric",
        psi=None,
        n_dropped=sample.n_dropped,
        diagnostics={
            "bandwidths_used": [h1, h2],
            "kernel": bw.kernel,
            "n_boot": n_boot,
            "fallback_points": zres.n_fallback,
        },
    )


def quasi_stayer_zeta(
    sample: DifferencedSample,
    eta: float,
    h_d1: float,
    kernel: str = "gaussian",
) -> float:
    """Fixed-window trend estimate from quasi-stayers.

    Regresses dy on d1 by kernel (local-constant) regression over the
    subsample with ``|dd| <= eta``, evaluates at every unit's d1, and
    averages the signed values.  The default Gaussian kernel guarantees
    positive mass at every evaluation point.  As eta shrinks the window
    captures less of the treatment effect, at the cost of fewer controls.
    """
    if not (eta > 0):
        raise ValueError("eta must be positive")
    if not (h_d1 > 0):
        raise ValueError("h_d1 must be positive")
    abs_dd = np.abs(sample.dd)
    keep = abs_dd <= eta
    if not keep.any():
        raise NoQuasiStayers(eta, float(abs_dd.min()))

    d1s = sample.d1[keep]
    ys = sample.dy[keep]
    ws = sample.weight[keep]

    n = sample.n
    m = d1s.shape[0]
    mhat = np.empty(n)
    chunk = max(1, int(_CHUNK_CELLS // max(m, 1)))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        k = _kernel(kernel, (sample.d1[lo:hi, None] - d1s[None, :]) / h_d1) * ws[None, :]
        denom = k.sum(axis=1)
        if np.any(denom <= 0):
            raise NoKernelMass(int((denom <= 0).sum()))
        mhat[lo:hi] = (k @ ys) / denom

    return float(weighted_mean(sample.s * mhat, sample.weight))


def _loo_cv_hdd(sample: DifferencedSample, h1: float, h2_rot: float, kernel: str) -> float:
    """Leave-one-out CV for the dd bandwidth on a grid around the rule of thumb.

    Uses the linear-smoother shortcut loo_resid = resid / (1 - L_ii); cost is
    O(n^2) per candidate, so this is practical up to a few thousand units.
    """
    grid = h2_rot * np.geomspace(1.0 / 3.0, 3.0, 9)
    best_h, best_score = h2_rot, math.inf
    k0 = _kernel(kernel, np.zeros(1))[0] ** 2
    for h2 in grid:
        g, mass, fb = _ll_points(
            sample.d1, sample.dd, sample.dy, sample.weight,
            sample.d1, sample.dd, h1, h2, kernel,
        )
        # diagonal of the smoother: own-point weight times (M^-1)_00,
        # recovered from the NW/LL mix is intractable here, so approximate
        # with the local-constant diagonal  L_ii = w_i k(0)^2 / mass_i
        lii = np.clip(sample.weight * k0 / mass, 0.0, 1.0 - 1e-8)
        resid = (sample.dy - g) / (1.0 - lii)
        score = float(np.sum(sample.weight * resid**2))
        if score < best_score:
            best_score, best_h = score, float(h2)
    return best_h
