"""Association risk, adaptive threshold, and uncertainty metrics.

Given an assignment with similarity c1 and runner-up similarity c2, the
association risk is

    sigma = -log(c1) - log(1 - c2)

and is compared against the margin-derived adaptive threshold

    gamma = -log(m1) - log(1 + m2 - c1).

The association uncertainty delta = sigma - gamma is positive exactly when
the match should be reconsidered. Cosine similarities can fall outside
(0, 1), so all log arguments are clamped first. Natural logs throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyHistory, InvalidConfig

DEFAULT_CLAMP_EPS = 1e-6


@dataclass(frozen=True)
class UncertaintyMargins:
    m1: float = 0.5
    m2: float = 0.05
    clamp_eps: float = DEFAULT_CLAMP_EPS

    def __post_init__(self):
        if not 0.0 < self.m1 < 1.0:
            raise InvalidConfig(f"m1 must be in (0,1), got {self.m1}")
        if not 0.0 < self.m2 < 1.0:
            raise InvalidConfig(f"m2 must be in (0,1), got {self.m2}")
        if not 0.0 < self.clamp_eps < 0.5:
            raise InvalidConfig(f"clamp_eps must be in (0,0.5), got {self.clamp_eps}")


@dataclass(frozen=True)
class AssociationVerdict:
    c1: float
    c2: float
    sigma: float
    gamma: float
    delta: float
    uncertain: bool


def _clamp(x: float, eps: float) -> float:
    return min(max(x, eps), 1.0 - eps)


def association_risk(c1: float, c2: float, clamp_eps: float = DEFAULT_CLAMP_EPS) -> float:
    """Risk of an assignment: low c1 and a strong runner-up both raise it."""
    c1 = _clamp(c1, clamp_eps)
    c2 = _clamp(c2, clamp_eps)
    return -math.log(c1) - math.log(1.0 - c2)


def adaptive_threshold(c1: float, margins: UncertaintyMargins) -> float:
    """Similarity-dependent cutoff the risk is compared against."""
    arg = max(1.0 + margins.m2 - c1, margins.clamp_eps)
    return -math.log(margins.m1) - math.log(arg)


def association_uncertainty(c1: float, c2: float,
                            margins: UncertaintyMargins | None = None) -> AssociationVerdict:
    """delta = sigma - gamma; the match is uncertain iff delta > 0."""
    if margins is None:
        margins = UncertaintyMargins()
    sigma = association_risk(c1, c2, margins.clamp_eps)
    gamma = adaptive_threshold(c1, margins)
    delta = sigma - gamma
    return AssociationVerdict(c1=c1, c2=c2, sigma=sigma, gamma=gamma,
                              delta=delta, uncertain=delta > 0.0)


def second_best(row, assigned: int) -> float:
    """Highest similarity in the row excluding the assigned entry.

    A single-candidate row has no competitor, which counts as zero risk."""
    if len(row) == 0:
        raise ValueError("row must be non-empty")
    if not 0 <= assigned < len(row):
        raise ValueError(f"assigned index {assigned} out of range")
    rest = [v for i, v in enumerate(row) if i != assigned]
    if not rest:
        return 0.0
    return float(max(rest))


def tracklet_uncertainty(deltas) -> float:
    """Mean of exp(delta) over a tracklet's association history."""
    deltas = list(deltas)
    if not deltas:
        raise EmptyHistory("tracklet uncertainty needs at least one delta")
    return sum(math.exp(d) for d in deltas) / len(deltas)
