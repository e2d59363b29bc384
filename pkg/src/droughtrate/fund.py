"""Buffer-fund sizing under the normal approximation of the pooled loss."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ValidationError, ZeroVarianceError
from .lossmodel import ClusterStats

DEFAULT_ETA = 1.96


def normal_cdf(x: float) -> float:
    """Standard normal CDF.

    Uses ``erfc`` on the tail side so small probabilities keep their
    relative precision.
    """
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class FundSpec:
    """Fund ``total_area * (mean_loss + eta * sqrt(var_loss))`` and the
    one-sided normal probability that a season's pooled loss exceeds it."""

    eta: float
    total_area: float
    mean_loss: float
    var_loss: float
    fund: float
    ruin_prob: float

    @property
    def per_ha(self) -> float:
        return self.fund / self.total_area

    def to_dict(self) -> dict:
        return asdict(self)


def size_fund(stats: ClusterStats, total_area: float, eta: float = DEFAULT_ETA) -> FundSpec:
    if not eta >= 0:
        raise ValidationError(f"eta must be >= 0, got {eta!r}")
    if not total_area > 0:
        raise ValidationError(f"total area must be > 0, got {total_area!r}")
    if not stats.var_loss >= 0:
        raise ValidationError("pooled loss variance must be >= 0")
    fund = total_area * (stats.mean_loss + eta * math.sqrt(stats.var_loss))
    return FundSpec(
        eta=float(eta),
        total_area=float(total_area),
        mean_loss=stats.mean_loss,
        var_loss=stats.var_loss,
        fund=fund,
        ruin_prob=normal_cdf(-eta),
    )


def standardize(loss: float, stats: ClusterStats) -> float:
    """z-score of a per-hectare pooled loss."""
    if stats.var_loss <= 0:
        raise ZeroVarianceError("pooled loss variance is zero; z-score undefined")
    return (loss - stats.mean_loss) / math.sqrt(stats.var_loss)
