"""Premium and subsidy rates.

Rates are fractions of the per-hectare loan instalment ``l``. Three regimes
by expected pooled surplus ``m``:

* ``m < 0``        government pays the whole sound rate
* ``0 <= m < l``   shared; government share ``nu >= 1 - m/l``
* ``m >= l``       farmer pays the whole sound rate
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .dataset import PriceSchedule, ThetaSeries, YieldPanel, derive_theta
from .empirics import thresholds_for_omega
from .errors import ValidationError
from .lossmodel import cluster_stats, loss_gain_surplus

logger = logging.getLogger(__name__)

SCHEDULE_HEADER = ("omega", "mean_surplus", "phi", "gamma", "kappa", "regime")


class Regime(str, enum.Enum):
    FULL_SUBSIDY = "full_subsidy"
    PARTIAL_SUBSIDY = "partial_subsidy"
    NO_SUBSIDY = "no_subsidy"


@dataclass(frozen=True)
class PolicyTerms:
    """``instalment`` per ha per season, ``retained_fraction`` p (benefit
    level is ``1 - p``), drought probability ``omega``, and an optional
    government share ``nu`` (``None`` selects the floor)."""

    instalment: float
    retained_fraction: float
    omega: float
    nu: float | None = None

    def __post_init__(self):
        if not self.instalment > 0:
            raise ValidationError(f"instalment must be > 0, got {self.instalment!r}")
        for name in ("retained_fraction", "omega"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v!r}")
        if self.nu is not None and not 0.0 <= self.nu <= 1.0:
            raise ValidationError(f"nu must lie in [0, 1], got {self.nu!r}")


@dataclass(frozen=True)
class RateQuote:
    gamma: float
    kappa: float
    regime: Regime
    nu: float
    l1: float
    R: float
    R1: float

    def amounts(self, instalment: float) -> tuple:
        """Farmer premium and government subsidy in currency/ha."""
        return self.gamma * instalment, self.kappa * instalment


class Residuals(NamedTuple):
    R: float
    l1: float
    R1: float


def sound_rate(omega: float, p: float) -> float:
    """Actuarially sound premium rate ``omega * (1 - p)``."""
    if not (0.0 <= omega <= 1.0 and 0.0 <= p <= 1.0):
        raise ValidationError("omega and p must lie in [0, 1]")
    return omega * (1.0 - p)


def residuals(mean_surplus: float, terms: PolicyTerms, gamma: float) -> Residuals:
    """Residual without insurance, average instalment outlay, and residual
    after instalments and premium."""
    l, w, p = terms.instalment, terms.omega, terms.retained_fraction
    if not l > 0:
        raise ValidationError("instalment must be > 0")
    l1 = (1.0 - w) * l + p * w * l
    return Residuals(
        R=mean_surplus - l,
        l1=l1,
        R1=mean_surplus - (1.0 - w) * l - p * w * l - gamma * l,
    )


def solvency_condition(mean_surplus: float, terms: PolicyTerms, gamma: float) -> bool:
    """True when the farmer keeps a positive residual after instalments and
    premium; identical to ``residuals(...).R1 > 0``."""
    return residuals(mean_surplus, terms, gamma).R1 > 0


def nu_floor(mean_surplus: float, instalment: float) -> float:
    """Smallest government share keeping the farmer solvent, clipped to [0, 1]."""
    if not instalment > 0:
        raise ValidationError("instalment must be > 0")
    return max(0.0, min(1.0, 1.0 - mean_surplus / instalment))


def set_rates(mean_surplus: float, terms: PolicyTerms) -> RateQuote:
    """Farmer rate ``gamma`` and subsidy rate ``kappa`` for a cluster with
    expected surplus ``mean_surplus``.

    ``gamma + kappa`` equals ``omega * (1 - p)`` exactly in floating point:
    in the shared band ``kappa`` is recomputed as ``base - gamma`` so one of
    the two subtractions is always exact.
    """
    base = sound_rate(terms.omega, terms.retained_fraction)
    l = terms.instalment
    floor = nu_floor(mean_surplus, l)
    if mean_surplus < 0:
        gamma, kappa, regime, nu = 0.0, base, Regime.FULL_SUBSIDY, 1.0
    elif mean_surplus < l:
        nu = floor if terms.nu is None else terms.nu
        if nu < floor:
            raise ValidationError(
                f"nu={nu!r} is below the solvency floor {floor!r} "
                f"(1 - E[S]/l with E[S]={mean_surplus!r}, l={l!r})"
            )
        kappa = base * nu
        gamma = base - kappa
        kappa = base - gamma
        regime = Regime.PARTIAL_SUBSIDY
    else:
        gamma, kappa, regime, nu = base, 0.0, Regime.NO_SUBSIDY, 0.0
    res = residuals(mean_surplus, terms, gamma)
    return RateQuote(gamma=gamma, kappa=kappa, regime=regime, nu=nu,
                     l1=res.l1, R=res.R, R1=res.R1)


@dataclass(frozen=True)
class ScheduleRow:
    omega: float
    mean_surplus: float
    phi: float
    gamma: float
    kappa: float
    regime: Regime
    crops: tuple


@dataclass(frozen=True)
class RateSchedule:
    rows: tuple
    subsidy_onset: float | None
    full_subsidy_onset: float | None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCHEDULE_HEADER)
            for r in self.rows:
                w.writerow([repr(r.omega), repr(r.mean_surplus), repr(r.phi),
                            repr(r.gamma), repr(r.kappa), r.regime.value])


def regime_crossings(rows: Sequence[ScheduleRow]) -> tuple:
    """Smallest grid omega needing any subsidy, and smallest needing full
    subsidy (``gamma == 0``)."""
    onset = next((r.omega for r in rows if r.kappa > 0), None)
    full = next((r.omega for r in rows if r.gamma == 0), None)
    return onset, full


def insurable_subset(panel, prices, thresholds, theta=None):
    """Drop crops whose mean surplus is not positive and renormalise shares.

    Returns ``(panel, thresholds, theta)``. If no crop is insurable the
    cluster is returned unchanged.
    """
    losses = loss_gain_surplus(panel, prices, thresholds)
    keep = [c for c, s in zip(panel.crops, losses.surplus.mean(axis=1)) if s > 0]
    if len(keep) == panel.n_crops:
        return panel, thresholds, theta
    if not keep:
        logger.warning("no crop has positive mean surplus; keeping the full cluster")
        return panel, thresholds, theta
    sub = panel.select(keep)
    equal = theta is not None and np.all(theta.shares == 1.0 / panel.n_crops)
    return sub, thresholds.select(keep), derive_theta(sub, equal_weights=bool(equal))


def rate_schedule(panel: YieldPanel, prices: PriceSchedule, terms: PolicyTerms,
                  omega_grid, *, theta: ThetaSeries | None = None,
                  equal_weights: bool = False, drop_uninsurable: bool = False) -> RateSchedule:
    """Rates across a grid of drought probabilities.

    At each grid point thresholds are re-derived at that frequency, the
    cluster's expected surplus recomputed and rates set with that omega.
    ``terms.nu``, when given, acts as a minimum government share: at points
    where the solvency floor is higher the floor is used.
    """
    grid = [float(w) for w in omega_grid]
    if any(not 0.0 < w <= 1.0 for w in grid):
        raise ValidationError("omega grid must lie in (0, 1]")
    if theta is None:
        theta = derive_theta(panel, equal_weights=equal_weights)
    rows = []
    for w in grid:
        thr = thresholds_for_omega(panel, w)
        p_, t_, th_ = panel, thr, theta
        if drop_uninsurable:
            p_, t_, th_ = insurable_subset(panel, prices, thr, theta)
            if th_ is None:
                th_ = derive_theta(p_, equal_weights=equal_weights)
        stats = cluster_stats(th_, loss_gain_surplus(p_, prices, t_))
        nu = terms.nu
        if nu is not None:
            nu = max(nu, nu_floor(stats.mean_surplus, terms.instalment))
        q = set_rates(stats.mean_surplus, replace(terms, omega=w, nu=nu))
        rows.append(ScheduleRow(w, stats.mean_surplus, stats.phi, q.gamma, q.kappa,
                                q.regime, p_.crops))
    onset, full = regime_crossings(rows)
    return RateSchedule(rows=tuple(rows), subsidy_onset=onset, full_subsidy_onset=full)


def instalment_from_history(records, window: int = 10) -> float:
    """Per-hectare instalment over the trailing ``window`` seasons:
    total instalments divided by total area."""
    if window < 1:
        raise ValidationError("window must be >= 1")
    recs = sorted(records, key=lambda r: r.year)[-window:]
    if not recs:
        raise ValidationError("no instalment records")
    if len(recs) < window:
        logger.warning("only %d instalment records for a %d-season window", len(recs), window)
    area = sum(r.total_area_ha for r in recs)
    if area <= 0:
        raise ValidationError("instalment records have zero total area")
    return sum(r.total_instalments for r in recs) / area
