"""
Stats - binomial proportion estimates and log-log exponent fits
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from chemdist.core.errors import FitError, ParameterError

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95


@dataclass(frozen=True)
class ProportionEstimate:
    """Monte Carlo estimate of a probability from `successes` out of `replicates`."""

    successes: int
    replicates: int
    ci_lo: float
    ci_hi: float
    # one-sided Clopper-Pearson upper bound, set only when no success was seen
    upper_bound: Optional[float] = None

    @property
    def estimate(self) -> float:
        return self.successes / self.replicates

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1.0 - p) / self.replicates)

    def as_dict(self) -> dict:
        return {
            "successes": self.successes,
            "replicates": self.replicates,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "upper_bound": self.upper_bound,
        }


def proportion(successes: int, replicates: int, confidence: float = CONFIDENCE) -> ProportionEstimate:
    """
    Wilson interval for a binomial proportion.

    Args:
        successes: Number of replicates where the event occurred
        replicates: Number of replicates (>= 1)
        confidence: Two-sided confidence level of the interval

    Returns:
        ProportionEstimate; zero-success cells also carry a one-sided upper bound
    """
    if replicates < 1:
        raise ParameterError(f"replicates must be positive, got {replicates}")
    if not (0 <= successes <= replicates):
        raise ParameterError(f"successes must lie in 0..{replicates}, got {successes}")
    ci = stats.binomtest(int(successes), int(replicates)).proportion_ci(confidence_level=confidence, method="wilson")
    upper = None
    if successes == 0:
        upper = float(stats.beta.ppf(confidence, 1, replicates))
    return ProportionEstimate(int(successes), int(replicates), float(ci.low), float(ci.high), upper)


@dataclass(frozen=True)
class ExponentFit:
    """Ordinary least squares on (log scale, log estimate)."""

    slope: float
    intercept: float
    stderr: float
    r2: float
    points: List[Tuple[float, float]]
    excluded: List[Tuple[float, float]] = field(default_factory=list)
    reliable: bool = True

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "r2": self.r2,
            "points": len(self.points),
            "excluded": len(self.excluded),
            "reliable": self.reliable,
        }


def fit_exponent(points: Sequence[Tuple[float, float]]) -> ExponentFit:
    """
    Log-log slope of estimate against scale.

    Points with a nonpositive or non-finite estimate are excluded and recorded.

    Raises:
        FitError: fewer than 3 usable points, or all usable scales equal
    """
    usable, excluded = [], []
    for scale, estimate in points:
        scale, estimate = float(scale), float(estimate)
        if scale > 0 and estimate > 0 and math.isfinite(scale) and math.isfinite(estimate):
            usable.append((scale, estimate))
        else:
            excluded.append((scale, estimate))
    if len(usable) < 3:
        raise FitError(f"need at least 3 positive points, got {len(usable)}")
    log_x = np.log([s for s, _ in usable])
    log_y = np.log([e for _, e in usable])
    if np.ptp(log_x) == 0:
        raise FitError("all scales are equal")
    result = stats.linregress(log_x, log_y)
    if excluded:
        logger.info("Excluded %d points from the fit", len(excluded))
    return ExponentFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=float(result.stderr),
        r2=float(result.rvalue) ** 2,
        points=list(zip(log_x.tolist(), log_y.tolist())),
        excluded=excluded,
    )


def unreliable_fit(points: Sequence[Tuple[float, float]], excluded: Sequence[Tuple[float, float]]) -> ExponentFit:
    """Placeholder fit for grids without enough signal."""
    logger.warning("Exponent fit unreliable: %d usable points", len(points))
    return ExponentFit(
        slope=math.nan,
        intercept=math.nan,
        stderr=math.nan,
        r2=math.nan,
        points=list(points),
        excluded=list(excluded),
        reliable=False,
    )
