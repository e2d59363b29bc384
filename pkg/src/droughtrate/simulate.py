"""Monte Carlo oracle: whole-year bootstrap of the panel.

Resampling draws entire years with replacement, so within a season the
crops keep their joint outcome and the cross-crop covariances survive.

Random streams: replication ``r`` uses PCG64 seeded from
``SeedSequence(seed, spawn_key=(r,))``. Results therefore depend only on
``(seed, r)`` and not on how replications are spread over worker threads.
Aggregates are taken with ``math.fsum`` (exactly rounded, so independent of
summation order).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import _accel
from .dataset import DeclarationLog, PriceSchedule, ThetaSeries, YieldPanel
from .empirics import ThresholdSet
from .errors import ValidationError
from .fund import FundSpec
from .lossmodel import loss_gain_surplus, pooled
from .ratemaking import PolicyTerms, RateQuote

BLOCK = 512
RESAMPLE_MODES = ("iid_years",)


@dataclass(frozen=True)
class SimConfig:
    replications: int = 10_000
    horizon: int = 25
    seed: int = 0
    resample_mode: str = "iid_years"
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.resample_mode not in RESAMPLE_MODES:
            raise ValidationError(f"resample_mode must be one of {RESAMPLE_MODES}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def to_dict(self):
        return {"value": _jsonable(self.value), "stderr": _jsonable(self.stderr)}


def _jsonable(x):
    return None if x is None or not math.isfinite(x) else float(x)


_NA = Estimate(float("nan"), float("nan"))


@dataclass(frozen=True)
class SimReport:
    """Simulation estimates; fields a run did not produce are NaN
    (``null`` in JSON)."""

    est_mean_loss: Estimate = _NA
    est_var_loss: Estimate = _NA
    est_ruin_freq: Estimate = _NA
    est_mean_surplus: Estimate = _NA
    farmer_ruin_freq: Estimate = _NA
    est_mean_outlay: Estimate = _NA

    def merge(self, other: "SimReport") -> "SimReport":
        kw = {}
        for f in fields(self):
            mine, theirs = getattr(self, f.name), getattr(other, f.name)
            kw[f.name] = theirs if math.isnan(mine.value) else mine
        return SimReport(**kw)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name).to_dict() for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _rng(seed, r):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))


def _estimate(per_rep) -> Estimate:
    x = np.asarray(per_rep, dtype=np.float64)
    R = x.size
    # shift by the first value so constant input gives an exact zero spread
    d = x - x[0]
    dm = math.fsum(d.tolist()) / R
    mean = float(x[0]) + dm
    if R < 2:
        return Estimate(mean, float("nan"))
    ss = math.fsum(((d - dm) ** 2).tolist())
    return Estimate(mean, math.sqrt(ss / (R - 1) / R))


def _draws(cfg: SimConfig, n_years: int, start: int, stop: int, omega: float | None = None):
    """Year indices (and Bernoulli declarations when ``omega`` is given) for
    replications ``start..stop-1``."""
    h = cfg.horizon
    idx = np.empty((stop - start, h), dtype=np.int64)
    dec = np.empty((stop - start, h), dtype=bool) if omega is not None else None
    for k, r in enumerate(range(start, stop)):
        g = _rng(cfg.seed, r)
        idx[k] = g.integers(0, n_years, size=h)
        if dec is not None:
            dec[k] = g.random(h) < omega
    return idx, dec


def _run_blocks(cfg: SimConfig, work):
    """Apply ``work(start, stop)`` over fixed-size replication blocks and
    concatenate the per-replication outputs in replication order."""
    starts = list(range(0, cfg.replications, BLOCK))
    spans = [(s, min(s + BLOCK, cfg.replications)) for s in starts]
    if cfg.workers == 1 or len(spans) == 1:
        parts = [work(s, e) for s, e in spans]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(lambda se: work(*se), spans))
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def _pooled_series(panel, prices, thresholds, theta):
    losses = loss_gain_surplus(panel, prices, thresholds)
    return pooled(theta, losses.loss), pooled(theta, losses.surplus)


def bootstrap_moments(panel: YieldPanel, prices: PriceSchedule, thresholds: ThresholdSet,
                      theta: ThetaSeries, cfg: SimConfig) -> SimReport:
    """Bootstrap mean and variance of the pooled loss, and mean pooled surplus.

    Each replication draws ``horizon`` years and computes the sample mean
    and unbiased variance of its seasons; the estimate is the average over
    replications and the standard error their spread over ``sqrt(R)``. The
    variance estimate targets the divisor-``n`` variance of the panel.
    """
    if panel.n_years < 2:
        raise ValidationError("panel needs at least two years")
    if cfg.horizon < 2:
        raise ValidationError("variance estimates need horizon >= 2")
    loss, surplus = _pooled_series(panel, prices, thresholds, theta)

    def work(s, e):
        idx, _ = _draws(cfg, panel.n_years, s, e)
        m, v = _accel.row_mean_var(loss, idx)
        ms, _ = _accel.row_mean_var(surplus, idx)
        return m, v, ms

    m, v, ms = _run_blocks(cfg, work)
    return SimReport(
        est_mean_loss=_estimate(m),
        est_var_loss=_estimate(v),
        est_mean_surplus=_estimate(ms),
    )


def ruin_frequency(fund: FundSpec, panel: YieldPanel, prices: PriceSchedule,
                   thresholds: ThresholdSet, theta: ThetaSeries, cfg: SimConfig) -> Estimate:
    """Share of simulated seasons whose pooled loss over ``fund.total_area``
    exceeds the fund."""
    loss, _ = _pooled_series(panel, prices, thresholds, theta)
    exceeds = loss * fund.total_area > fund.fund

    def work(s, e):
        idx, _ = _draws(cfg, panel.n_years, s, e)
        return (_accel.row_count(exceeds, idx) / cfg.horizon,)

    (freq,) = _run_blocks(cfg, work)
    return _estimate(freq)


def scheme_trajectory(terms: PolicyTerms, quote: RateQuote, panel: YieldPanel,
                      prices: PriceSchedule, thresholds: ThresholdSet, theta: ThetaSeries,
                      cfg: SimConfig, log: DeclarationLog | None = None) -> SimReport:
    """Simulate the farmer's seasons under the scheme.

    Each season the farmer pays the premium ``gamma * l`` plus either the
    full instalment ``l`` or, in a declared season, the retained part
    ``p * l``. Declarations are Bernoulli(``terms.omega``) unless ``log`` is
    given, in which case each resampled year carries its recorded flag.
    A replication counts as ruined when its cumulative residual (pooled
    surplus minus outlay) drops below zero in any season.
    """
    _, surplus = _pooled_series(panel, prices, thresholds, theta)
    mask = log.mask(panel) if log is not None else None

    def work(s, e):
        idx, dec = _draws(cfg, panel.n_years, s, e, omega=None if log is not None else terms.omega)
        if mask is not None:
            dec = mask[idx]
        outlay, ruined = _accel.scheme_paths(
            surplus, idx, dec, terms.instalment, terms.retained_fraction, quote.gamma
        )
        ms, _ = _accel.row_mean_var(surplus, idx)
        return outlay, ruined.astype(np.float64), ms

    outlay, ruined, ms = _run_blocks(cfg, work)
    return SimReport(
        est_mean_surplus=_estimate(ms),
        farmer_ruin_freq=_estimate(ruined),
        est_mean_outlay=_estimate(outlay),
    )
