"""Empirical distribution machinery: ECDF, quantile thresholds, declaration
coincidence and sample moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import DeclarationLog, YieldPanel
from .errors import ComputationError, ValidationError

EXTERNAL = "external"


def _sample(sample):
    s = np.asarray(sample, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValidationError("sample is empty")
    if not np.all(np.isfinite(s)):
        raise ValidationError("sample contains non-finite values")
    return s


def empirical_cdf(sample, x) -> float:
    """Fraction of ``sample`` values ``<= x`` (right-continuous step)."""
    s = _sample(sample)
    return np.count_nonzero(s <= x) / s.size


def threshold_for_omega(sample, omega) -> float:
    """Smallest sample value whose ECDF is at least ``omega``.

    This is the ``k``-th order statistic with ``k = ceil(omega * n)``; no
    interpolation, so the result is always an observed value.
    """
    if not 0.0 < omega <= 1.0:
        raise ValidationError(f"omega must lie in (0, 1], got {omega!r}")
    s = np.sort(_sample(sample))
    n = s.size
    k = min(n, math.ceil(omega * n))
    # omega*n can land just above an integer (0.7*10); match the ECDF's k/n
    while k > 1 and (k - 1) / n >= omega:
        k -= 1
    while k < n and k / n < omega:
        k += 1
    return float(s[k - 1])


@dataclass(frozen=True, eq=False)
class ThresholdSet:
    """Per-crop drought thresholds and their diagnostics.

    ``omega_target`` is the frequency the thresholds were derived from, or
    ``"external"`` when they were supplied directly. ``psi_true`` and
    ``psi_false`` are ``None`` when no declaration log was available.
    """

    crops: tuple
    mu_c: np.ndarray
    omega_target: object
    omega_j: np.ndarray
    psi_true: np.ndarray | None = None
    psi_false: np.ndarray | None = None

    def __post_init__(self):
        mu = np.array(self.mu_c, dtype=np.float64)
        if not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise ValidationError("thresholds must be finite and >= 0")
        mu.flags.writeable = False
        object.__setattr__(self, "mu_c", mu)
        object.__setattr__(self, "crops", tuple(self.crops))

    @property
    def omega_slack(self) -> np.ndarray:
        """Realised minus target frequency (ties can push it above zero)."""
        if self.omega_target == EXTERNAL:
            raise ValidationError("external thresholds have no target frequency")
        return self.omega_j - self.omega_target

    def select(self, crops) -> "ThresholdSet":
        keep = set(crops)
        idx = [j for j, c in enumerate(self.crops) if c in keep]
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return ThresholdSet(
            crops=[self.crops[j] for j in idx], mu_c=self.mu_c[idx],
            omega_target=self.omega_target, omega_j=self.omega_j[idx],
            psi_true=pick(self.psi_true), psi_false=pick(self.psi_false),
        )


def crop_omega(panel: YieldPanel, mu_c) -> np.ndarray:
    """Realised per-crop drought frequency ``F_j(mu_c[j])``."""
    mu = np.asarray(getattr(mu_c, "mu_c", mu_c), dtype=np.float64)
    return np.array([empirical_cdf(panel.yields[j], mu[j]) for j in range(panel.n_crops)])


def coincidence(panel: YieldPanel, mu_c, log: DeclarationLog) -> np.ndarray:
    """Per-crop share of declared years whose yield is strictly below the
    threshold.

    A yield exactly at the threshold produces no loss, so it does not count
    as a coincident declaration.
    """
    mu = np.asarray(getattr(mu_c, "mu_c", mu_c), dtype=np.float64)
    mask = log.mask(panel)
    n_declared = int(mask.sum())
    if n_declared == 0:
        raise ComputationError("no declared years: coincidence is undefined")
    below = panel.yields[:, mask] < mu[:, None]
    return below.sum(axis=1) / n_declared


def thresholds_for_omega(panel: YieldPanel, omega: float,
                         log: DeclarationLog | None = None) -> ThresholdSet:
    """Thresholds at a common drought frequency ``omega`` for every crop."""
    mu = np.array([threshold_for_omega(panel.yields[j], omega) for j in range(panel.n_crops)])
    return _assemble(panel, mu, float(omega), log)


def external_thresholds(panel: YieldPanel, mu_c, log: DeclarationLog | None = None) -> ThresholdSet:
    mu = np.asarray(mu_c, dtype=np.float64)
    if mu.shape != (panel.n_crops,):
        raise ValidationError(f"need {panel.n_crops} thresholds, got shape {mu.shape}")
    return _assemble(panel, mu, EXTERNAL, log)


def _assemble(panel, mu, target, log):
    psi_t = psi_f = None
    if log is not None and log.declared_years:
        psi_t = coincidence(panel, mu, log)
        psi_f = 1.0 - psi_t
    return ThresholdSet(
        crops=panel.crops, mu_c=mu, omega_target=target,
        omega_j=crop_omega(panel, mu), psi_true=psi_t, psi_false=psi_f,
    )


def sample_moments(series, ddof: int = 1) -> tuple:
    """Arithmetic mean and variance (divisor ``n - ddof``)."""
    s = _sample(series)
    if s.size <= ddof:
        raise ValidationError(f"variance needs more than {ddof} observation(s)")
    m = s.mean()
    return float(m), float(((s - m) ** 2).sum() / (s.size - ddof))


def sample_cov(x, y, ddof: int = 1) -> float:
    x, y = _sample(x), _sample(y)
    if x.size != y.size:
        raise ValidationError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValidationError("covariance needs at least two observations")
    return float(((x - x.mean()) * (y - y.mean())).sum() / (x.size - ddof))
