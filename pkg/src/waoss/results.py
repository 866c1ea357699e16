"""Shared estimate container and weighted-moment helpers.

All estimators report a :class:`ThetaEstimate`.  Moments are weighted means
throughout, with the effective sample size ``(sum w)^2 / sum w^2`` standing
in for ``n``; at unit weights this reduces to the textbook formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import InvalidLevel


def weighted_mean(x: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum(w * x) / np.sum(w))


def weighted_var(x: np.ndarray, w: np.ndarray) -> float:
    """Weighted population variance around the weighted mean."""
    m = weighted_mean(x, w)
    return float(np.sum(w * (x - m) ** 2) / np.sum(w))


def effective_n(w: np.ndarray) -> float:
    """Kish effective sample size (sum w)^2 / sum w^2."""
    sw = np.sum(w)
    return float(sw * sw / np.sum(w * w))


def z_quantile(level: float) -> float:
    """Two-sided standard-normal critical value for a confidence level.

    Uses the Cephes ``ndtri`` rational approximation (accurate well past
    1e-9), not a table lookup.
    """
    if not (0.0 < level < 1.0):
        raise InvalidLevel(f"confidence level must be in (0, 1), got {level!r}")
    return float(ndtri(1.0 - (1.0 - level) / 2.0))


def wald_ci(theta: float, se: float, level: float) -> tuple[float, float]:
    """Symmetric normal-approximation interval ``theta +- z(level) * se``."""
    if not (se >= 0):
        raise ValueError(f"se must be >= 0, got {se!r}")
    z = z_quantile(level)
    return (theta - z * se, theta + z * se)


@dataclass(frozen=True)
class ThetaEstimate:
    """A point estimate of the average switcher slope with inference.

    ``psi`` holds per-unit influence values whenever the estimator has a
    closed-form linearization (parametric, TWFE); bootstrap-based estimates
    leave it None.  ``se``/``ci`` are None when inference was not requested
    (e.g. zero bootstrap replicates).
    """

    theta_hat: float
    se: Optional[float]
    ci: Optional[tuple[float, float]]
    level: float
    n: int
    estimator_tag: str
    psi: Optional[np.ndarray] = field(default=None, repr=False)
    n_dropped: int = 0
    diagnostics: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.psi is not None:
            p = np.asarray(self.psi, dtype=float)
            p.flags.writeable = False
            object.__setattr__(self, "psi", p)

    def to_json_dict(self) -> dict:
        """Serializable summary; see the documented result schema."""
        out = {
            "estimator": self.estimator_tag,
            "theta_hat": self.theta_hat,
            "se": self.se,
            "ci": None if self.ci is None else [self.ci[0], self.ci[1]],
            "level": self.level,
            "n": self.n,
            "n_dropped": self.n_dropped,
        }
        out.update(self.diagnostics)
        return out
