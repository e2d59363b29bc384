"""Per-crop and pooled losses, gains and surpluses; variance decomposition
of the pooled loss and the coefficient of effectiveness of crop mixing.

Expectations over years are sample means. Identity checks between the
direct and expanded forms use population (divisor ``n``) moments, where the
algebra holds exactly; unbiased versions are reported next to them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PriceSchedule, ThetaSeries, YieldPanel
from .empirics import ThresholdSet
from .errors import IdentityCheckError, ValidationError, ZeroVarianceError

IDENTITY_RTOL = 1e-9

VAR_MODES = ("direct", "decomposed", "independent_reduction")


@dataclass(frozen=True, eq=False)
class LossSeries:
    """Priced shortfall ``loss``, excess ``gain`` and ``surplus = gain - loss``,
    each ``(J, n)`` in currency/ha."""

    crops: tuple
    loss: np.ndarray
    gain: np.ndarray
    surplus: np.ndarray

    @property
    def n_years(self) -> int:
        return self.loss.shape[1]


@dataclass(frozen=True)
class SurplusStats:
    mean_surplus: float
    factorized_mean_surplus: float
    per_crop_mean: np.ndarray
    insurable: np.ndarray


@dataclass(frozen=True)
class ClusterStats:
    """Pooled-loss moments for a crop cluster.

    ``var_loss`` and ``weighted_avg_var`` use the unbiased divisor;
    ``var_loss_pop`` is the divisor-``n`` variance of the same series.
    ``phi`` is NaN when every crop's loss variance is zero.
    """

    mean_loss: float
    var_loss: float
    var_loss_pop: float
    mean_surplus: float
    mean_gain: float
    phi: float
    weighted_avg_var: float
    per_crop_mean_surplus: np.ndarray
    per_crop_insurable: np.ndarray
    n_years: int


@dataclass(frozen=True)
class GrossPremiumBreakdown:
    net_premium: float
    buffer_load: float
    admin_cost: float
    gross: float


def _close(a, b, scale=0.0, rtol=IDENTITY_RTOL):
    return abs(a - b) <= rtol * max(abs(a), abs(b), scale)


def _pop_cov(x, y):
    return float(((x - x.mean()) * (y - y.mean())).mean())


def _check_aligned(theta: ThetaSeries, losses: LossSeries):
    if theta.shares.shape != losses.loss.shape:
        raise ValidationError(
            f"theta {theta.shares.shape} and losses {losses.loss.shape} are not aligned"
        )


def pooled(theta: ThetaSeries, matrix) -> np.ndarray:
    """Per-year area-weighted sum over crops, accumulated in crop order."""
    out = np.zeros(matrix.shape[1])
    for j in range(matrix.shape[0]):
        out += theta.shares[j] * matrix[j]
    return out


def loss_gain_surplus(panel: YieldPanel, prices: PriceSchedule,
                      thresholds: ThresholdSet) -> LossSeries:
    lam = prices.matrix(panel)
    mu = thresholds.mu_c[:, None]
    loss = lam * np.maximum(0.0, mu - panel.yields)
    gain = lam * np.maximum(0.0, panel.yields - mu)
    surplus = gain - loss
    for a in (loss, gain, surplus):
        a.flags.writeable = False
    return LossSeries(crops=panel.crops, loss=loss, gain=gain, surplus=surplus)


def revenue_series(panel: YieldPanel, prices: PriceSchedule) -> np.ndarray:
    """Revenue per hectare, price times yield, shape ``(J, n)``."""
    return prices.matrix(panel) * panel.yields


def mean_weighted_loss(theta: ThetaSeries, losses: LossSeries) -> float:
    """Mean of the pooled loss series.

    Cross-checked against the factorised form
    ``sum_j alpha_j * mean(L_j) + cov(theta_j, L_j)``; a mismatch beyond
    1e-9 relative raises :class:`IdentityCheckError`.
    """
    _check_aligned(theta, losses)
    direct = float(pooled(theta, losses.loss).mean())
    terms = [
        theta.alphas[j] * losses.loss[j].mean() + _pop_cov(theta.shares[j], losses.loss[j])
        for j in range(losses.loss.shape[0])
    ]
    factorised = float(sum(terms))
    scale = float(sum(abs(t) for t in terms))
    if not _close(direct, factorised, scale):
        raise IdentityCheckError(
            f"pooled mean {direct!r} != factorised form {factorised!r}"
        )
    return direct


def _decomposed_pop_var(theta, L):
    J = L.shape[0]
    X = theta * L
    total = 0.0
    for j in range(J):
        t, l = theta[j], L[j]
        second = _pop_cov(t ** 2, l ** 2) + (t ** 2).mean() * (l ** 2).mean()
        first = _pop_cov(t, l) + t.mean() * l.mean()
        total += second - first ** 2
    for i in range(J):
        for j in range(J):
            if i != j:
                total += _pop_cov(X[i], X[j])
    return total


def var_weighted_loss(theta: ThetaSeries, losses: LossSeries, mode: str = "direct",
                      ddof: int = 0) -> float:
    """Variance of the pooled loss.

    ``direct``
        Variance of the per-year pooled series.
    ``decomposed``
        Term-by-term expansion: per-crop ``Var(theta_j L_j)`` written through
        ``Cov(theta^2, L^2)``, ``E[theta^2] E[L^2]`` and
        ``(Cov(theta, L) + E[theta] E[L])^2``, plus all cross covariances.
        Equals ``direct`` up to rounding.
    ``independent_reduction``
        ``sum_j Cov(theta_j^2, L_j^2)`` as published for pairwise-independent
        inputs. It drops the ``E[theta^2]E[L^2] - (E[theta]E[L])^2`` terms,
        so it is not a variance in general; kept for reproduction only.

    All modes use divisor ``n - ddof``.
    """
    _check_aligned(theta, losses)
    n = losses.n_years
    if n < 2:
        raise ValidationError("variance needs at least two years")
    if ddof not in (0, 1):
        raise ValidationError("ddof must be 0 or 1")
    scale = n / (n - ddof)
    if mode == "direct":
        s = pooled(theta, losses.loss)
        return float(((s - s.mean()) ** 2).sum() / (n - ddof))
    if mode == "decomposed":
        return float(_decomposed_pop_var(theta.shares, losses.loss) * scale)
    if mode == "independent_reduction":
        return float(sum(
            _pop_cov(theta.shares[j] ** 2, losses.loss[j] ** 2)
            for j in range(losses.loss.shape[0])
        ) * scale)
    raise ValidationError(f"unknown mode {mode!r}; expected one of {VAR_MODES}")


def weighted_average_variance(theta: ThetaSeries, losses: LossSeries, ddof: int = 0) -> float:
    """``sum_j alpha_j Var(L_j)``."""
    n = losses.n_years
    v = ((losses.loss - losses.loss.mean(axis=1, keepdims=True)) ** 2).sum(axis=1) / (n - ddof)
    return float(sum(theta.alphas[j] * v[j] for j in range(v.size)))


def coefficient_of_effectiveness(theta: ThetaSeries, losses: LossSeries) -> float:
    """Pooled-loss variance over the area-weighted average of per-crop loss
    variances. Lower means mixing crops removes more risk.

    With constant shares the ratio is recomputed from the
    ``alpha_i alpha_j Cov(L_i, L_j)`` expansion and the two must agree.
    """
    _check_aligned(theta, losses)
    denom = weighted_average_variance(theta, losses)
    if denom <= 0:
        raise ZeroVarianceError("weighted average loss variance is zero")
    num = var_weighted_loss(theta, losses, "direct", ddof=0)
    phi = num / denom
    if theta.is_constant:
        a = theta.alphas
        C = np.cov(losses.loss, ddof=0) if losses.loss.shape[0] > 1 else \
            np.array([[losses.loss[0].var()]])
        expanded = 0.0
        for i in range(a.size):
            for j in range(a.size):
                expanded += a[i] * a[j] * C[i, j]
        if not _close(num, expanded, float(np.abs(np.outer(a, a) * C).sum())):
            raise IdentityCheckError(
                f"constant-share expansion {expanded!r} != pooled variance {num!r}"
            )
    return float(phi)


def equal_variance_effectiveness(weights) -> float:
    """Effectiveness for uncorrelated, equal-variance losses: ``sum w_j^2``."""
    w = np.asarray(weights, dtype=np.float64)
    return float((w ** 2).sum())


def effectiveness_minimizer(n_crops: int) -> tuple:
    """Weights minimising ``sum w_j^2`` on the simplex, and the minimum.

    Stationarity of the Lagrangian gives ``2 w_j = lambda`` for every ``j``,
    so the weights are all ``1/J`` and the minimum is ``1/J``.
    """
    if n_crops < 1:
        raise ValidationError("need at least one crop")
    w = np.full(n_crops, 1.0 / n_crops)
    return w, 1.0 / n_crops


def surplus_stats(theta: ThetaSeries, losses: LossSeries) -> SurplusStats:
    """Mean pooled surplus and per-crop insurability (``E[S_j] > 0``).

    ``factorized_mean_surplus`` is ``sum_j alpha_j E[S_j]``, the value the
    mean takes when shares are constant or independent of surpluses.
    """
    _check_aligned(theta, losses)
    per_crop = losses.surplus.mean(axis=1)
    mean_s = float(pooled(theta, losses.surplus).mean())
    factorised = float(sum(theta.alphas[j] * per_crop[j] for j in range(per_crop.size)))
    return SurplusStats(
        mean_surplus=mean_s,
        factorized_mean_surplus=factorised,
        per_crop_mean=per_crop,
        insurable=per_crop > 0,
    )


def cluster_stats(theta: ThetaSeries, losses: LossSeries) -> ClusterStats:
    mean_loss = mean_weighted_loss(theta, losses)
    var_pop = var_weighted_loss(theta, losses, "direct", ddof=0)
    var_unb = var_weighted_loss(theta, losses, "direct", ddof=1)
    try:
        phi = coefficient_of_effectiveness(theta, losses)
    except ZeroVarianceError:
        phi = float("nan")
    ss = surplus_stats(theta, losses)
    return ClusterStats(
        mean_loss=mean_loss,
        var_loss=var_unb,
        var_loss_pop=var_pop,
        mean_surplus=ss.mean_surplus,
        mean_gain=float(pooled(theta, losses.gain).mean()),
        phi=phi,
        weighted_avg_var=weighted_average_variance(theta, losses, ddof=1),
        per_crop_mean_surplus=ss.per_crop_mean,
        per_crop_insurable=ss.insurable,
        n_years=losses.n_years,
    )


def gross_premium(net: float, buffer: float, admin: float) -> GrossPremiumBreakdown:
    """Gross premium as net premium plus buffer load plus administrative cost."""
    parts = (float(net), float(buffer), float(admin))
    if any(not np.isfinite(p) or p < 0 for p in parts):
        raise ValidationError("premium components must be finite and >= 0")
    return GrossPremiumBreakdown(*parts, gross=parts[0] + parts[1] + parts[2])
