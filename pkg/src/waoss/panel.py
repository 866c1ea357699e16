"""Two-period panel data model and first-differencing.

The estimators in this package work on a ``DifferencedSample``: per-unit
outcome changes ``dy``, treatment changes ``dd``, switching directions
``s = sign(dd)``, baseline treatments ``d1`` and weights.  Everything is
immutable after construction; the arrays are shared read-only.

Units whose treatment does not change ("stayers") have no defined slope and
are rejected or dropped according to a ``StayerPolicy``.  Units with a tiny
but nonzero change ("quasi-stayers") are the backbone of identification and
are summarized by :func:`summarize_quasi_stayers`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import AllUnitsDropped, EmptyPanel, StayerFound


def sign(x: float) -> int:
    """Sign of ``x``: -1, 0 or +1.  ``x`` must be finite."""
    if x > 0:
        return 1
    if x < 0:
        return -1
    return 0


@dataclass(frozen=True)
class UnitObservation:
    """One unit observed in two periods (optionally with a pre-period).

    Parameters
    ----------
    unit_id : hashable
        Opaque identifier; only used in error messages and output.
    d1, d2 : float
        Treatment in periods 1 and 2.
    y1, y2 : float
        Outcome in periods 1 and 2.
    weight : float, default 1.0
        Nonnegative sampling/analytic weight.
    d0, y0 : float, optional
        Pre-period treatment and outcome; both or neither must be given.
    """

    unit_id: object
    d1: float
    d2: float
    y1: float
    y2: float
    weight: float = 1.0
    d0: Optional[float] = None
    y0: Optional[float] = None

    def __post_init__(self):
        for name in ("d1", "d2", "y1", "y2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ValueError(f"weight must be finite and >= 0, got {self.weight!r}")
        if (self.d0 is None) != (self.y0 is None):
            raise ValueError("d0 and y0 must be given together")
        if self.d0 is not None:
            if not (math.isfinite(self.d0) and math.isfinite(self.y0)):
                raise ValueError("d0 and y0 must be finite")

    @property
    def has_pre_period(self) -> bool:
        return self.d0 is not None


@dataclass(frozen=True)
class DifferencedUnit:
    """A retained unit after first-differencing: dy = y2-y1, dd = d2-d1."""

    unit_id: object
    dy: float
    dd: float
    s: int
    d1: float
    weight: float


@dataclass(frozen=True)
class StayerPolicy:
    """What to do with units whose |treatment change| <= tolerance.

    mode='error' (default) refuses the sample, naming the first offending
    unit; mode='drop' discards stayers and records how many were lost.
    """

    mode: str = "error"
    tolerance: float = 0.0

    def __post_init__(self):
        if self.mode not in ("error", "drop"):
            raise ValueError(f"mode must be 'error' or 'drop', got {self.mode!r}")
        if not (self.tolerance >= 0):
            raise ValueError("tolerance must be >= 0")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DifferencedSample:
    """Estimation-ready arrays of per-unit differences.

    Attributes
    ----------
    dy, dd, d1, weight : ndarray
        Outcome change, treatment change, baseline treatment, weight.
    s : ndarray
        sign(dd) in {-1.0, +1.0}.
    unit_ids : tuple
        Unit identifiers, aligned with the arrays.
    stayer_policy_applied : str
        'error' or 'drop'.
    n_dropped : int
        Stayers discarded under mode='drop'.
    """

    dy: np.ndarray
    dd: np.ndarray
    s: np.ndarray
    d1: np.ndarray
    weight: np.ndarray
    unit_ids: tuple = field(repr=False)
    stayer_policy_applied: str = "error"
    n_dropped: int = 0

    def __post_init__(self):
        for name in ("dy", "dd", "s", "d1", "weight"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.dy.shape[0]
        if n < 1:
            raise EmptyPanel("differenced sample has no units")
        for name in ("dd", "s", "d1", "weight"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} has wrong shape")
        if len(self.unit_ids) != n:
            raise ValueError("unit_ids length mismatch")
        if not np.all(np.isfinite(self.dy)) or not np.all(np.isfinite(self.dd)):
            raise ValueError("dy and dd must be finite")
        if np.any(self.s * self.dd <= 0):
            raise ValueError("s must be the sign of a nonzero dd")
        if not self.weight.sum() > 0:
            raise ValueError("total weight must be positive")

    @property
    def n(self) -> int:
        return self.dy.shape[0]

    @property
    def units(self) -> tuple:
        """Per-unit view; convenient for inspection, not for estimation."""
        return tuple(
            DifferencedUnit(uid, float(dy), float(dd), int(s), float(d1), float(w))
            for uid, dy, dd, s, d1, w in zip(
                self.unit_ids, self.dy, self.dd, self.s, self.d1, self.weight
            )
        )

    @classmethod
    def from_arrays(
        cls,
        dy,
        dd,
        d1,
        weight=None,
        unit_ids=None,
        stayer_policy_applied: str = "error",
        n_dropped: int = 0,
    ) -> "DifferencedSample":
        dy = np.asarray(dy, dtype=float)
        n = dy.shape[0]
        if weight is None:
            weight = np.ones(n)
        if unit_ids is None:
            unit_ids = tuple(range(n))
        dd = np.asarray(dd, dtype=float)
        return cls(
            dy=dy,
            dd=dd,
            s=np.sign(dd),
            d1=np.asarray(d1, dtype=float),
            weight=np.asarray(weight, dtype=float),
            unit_ids=tuple(unit_ids),
            stayer_policy_applied=stayer_policy_applied,
            n_dropped=n_dropped,
        )


def difference_panel(
    panel: Iterable[UnitObservation],
    policy: StayerPolicy = StayerPolicy(),
) -> DifferencedSample:
    """First-difference a two-period panel.

    Each retained unit gets ``dy = y2 - y1``, ``dd = d2 - d1`` and
    ``s = sign(dd)``.  Units with ``|dd| <= policy.tolerance`` are stayers:
    under ``mode='error'`` the first one raises :class:`StayerFound`; under
    ``mode='drop'`` they are discarded and counted.  Retained units keep
    their input order.

    Raises
    ------
    EmptyPanel
        ``panel`` is empty.
    StayerFound
        A stayer was found under ``mode='error'``.
    AllUnitsDropped
        Every unit was a stayer under ``mode='drop'``.
    """
    panel = list(panel)
    if not panel:
        raise EmptyPanel("panel contains no units")

    d1 = np.array([u.d1 for u in panel], dtype=float)
    dd = np.array([u.d2 for u in panel], dtype=float) - d1
    dy = np.array([u.y2 - u.y1 for u in panel], dtype=float)
    weight = np.array([u.weight for u in panel], dtype=float)

    stayer = np.abs(dd) <= policy.tolerance
    if policy.mode == "error":
        if stayer.any():
            i = int(np.argmax(stayer))
            raise StayerFound(panel[i].unit_id, float(dd[i]))
        keep = slice(None)
        n_dropped = 0
    else:
        keep = ~stayer
        n_dropped = int(stayer.sum())
        if n_dropped == len(panel):
            raise AllUnitsDropped(
                f"all {n_dropped} units are stayers at tolerance {policy.tolerance!r}"
            )

    if policy.mode == "error":
        kept_ids = tuple(u.unit_id for u in panel)
    else:
        kept_ids = tuple(u.unit_id for u, k in zip(panel, keep) if k)

    return DifferencedSample(
        dy=dy[keep],
        dd=dd[keep],
        s=np.sign(dd[keep]),
        d1=d1[keep],
        weight=weight[keep],
        unit_ids=kept_ids,
        stayer_policy_applied=policy.mode,
        n_dropped=n_dropped,
    )


def summarize_quasi_stayers(
    sample: DifferencedSample, eta_grid: Sequence[float]
) -> list[dict]:
    """Count units with |dd| <= eta for each eta in the grid.

    Returns one row per eta: ``{"eta", "count", "weight_share", "warning"}``.
    ``warning`` flags an eta with zero quasi-stayers, which leaves the
    counterfactual-trend comparison without controls at that window.
    Counts are nondecreasing in eta.
    """
    if len(eta_grid) == 0:
        raise ValueError("eta_grid is empty")
    if any(not (e > 0) for e in eta_grid):
        raise ValueError("eta_grid entries must be strictly positive")

    abs_dd = np.abs(sample.dd)
    total_w = sample.weight.sum()
    rows = []
    for eta in eta_grid:
        mask = abs_dd <= eta
        count = int(mask.sum())
        share = float(sample.weight[mask].sum() / total_w)
        rows.append(
            {"eta": float(eta), "count": count, "weight_share": share, "warning": count == 0}
        )
    return rows
