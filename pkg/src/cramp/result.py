from dataclasses import dataclass, field
from typing import Optional

from .linalg import RefDistribution


@dataclass(frozen=True)
class TestResult:
    """Outcome of a single test.

    ``statistic`` is the value compared against ``reference``; for the
    functional tests ``raw`` keeps the unscaled functional as well.
    """

    statistic: float
    reference: RefDistribution
    p_value: float
    strategy: str  # "asymptotic" | "monte-carlo" | "analytic"
    method: str
    raw: Optional[float] = None
    details: dict = field(default_factory=dict, compare=False)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        out = {
            "method": self.method,
            "statistic": self.statistic,
            "reference": self.reference.describe(),
            "p_value": self.p_value,
            "strategy": self.strategy,
        }
        if self.raw is not None:
            out["raw"] = self.raw
        if self.details:
            out["details"] = dict(self.details)
        return out
