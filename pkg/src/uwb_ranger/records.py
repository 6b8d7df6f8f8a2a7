"""Small value types shared by the classifiers and estimators."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class Hypothesis(enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class SoftDecision:
    p_los: float
    p_nlos: float

    def __post_init__(self):
        if not (0.0 <= self.p_los <= 1.0 and 0.0 <= self.p_nlos <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(self.p_los + self.p_nlos - 1.0) > 1e-12:
            raise ValueError("p_los + p_nlos must equal 1")

    @property
    def hard(self) -> Hypothesis:
        # Ties resolve to LOS.
        return Hypothesis.LOS if self.p_los >= 0.5 else Hypothesis.NLOS


@dataclass(frozen=True)
class RangeEstimate:
    mean: float
    variance: float
    p_los: float = 1.0
    method: str = ""

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError("range estimate must be finite")
        if self.variance < 0:
            raise ValueError("variance must be non-negative")
