from abc import ABC, abstractmethod
from enum import Enum
from typing import Literal, Optional
import logging

import numpy as np
from pydantic import BaseModel, model_validator

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


class CheckReport(BaseModel):
    """Outcome of one property check"""

    name: str
    passed: bool
    statistic: float
    threshold: float
    details: str = ""
    verdict: Verdict

    @model_validator(mode="after")
    def _check_verdict(self):
        if self.passed != (self.verdict == Verdict.PASS):
            raise ValueError(f"report '{self.name}': passed={self.passed} contradicts verdict {self.verdict.value}")
        return self

    def row(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict.value,
            "passed": self.passed,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "details": self.details
        }


Direction = Literal["lt", "le", "gt", "ge"]

_COMPARE = {
    "lt": np.less,
    "le": np.less_equal,
    "gt": np.greater,
    "ge": np.greater_equal
}


class BaseCheck(ABC):
    """
    Abstract property check

    Subclasses implement run() and build their reports through
    _create_report(), which derives the verdict from the declared direction
    unless the check decides it explicitly.
    """

    name: str = "check"
    direction: Direction = "lt"

    def __init__(self, name: Optional[str] = None):
        if name:
            self.name = name
        logger.debug(f"Initialized {self.name} check")

    @abstractmethod
    def run(self, *args, **kwargs) -> CheckReport:
        """
        Evaluate the property

        Returns:
            CheckReport
        """
        pass

    def _create_report(
        self,
        statistic: float,
        threshold: float,
        details: str = "",
        passed: Optional[bool] = None
    ) -> CheckReport:
        """
        Build a report

        Args:
            statistic: Measured quantity
            threshold: Bound it is compared against
            details: Free-form diagnostics
            passed: Explicit verdict; by default statistic <direction> threshold
        """
        if passed is None:
            passed = bool(_COMPARE[self.direction](statistic, threshold))
        report = CheckReport(
            name=self.name,
            passed=passed,
            statistic=float(statistic),
            threshold=float(threshold),
            details=details,
            verdict=Verdict.PASS if passed else Verdict.FAIL
        )
        log = logger.info if passed else logger.warning
        log(f"{self.name}: {report.verdict.value} (statistic {report.statistic:.6g}, threshold {report.threshold:.6g})")
        return report

    def _inconclusive(self, reason: str, statistic: float = float("nan"), threshold: float = float("nan")) -> CheckReport:
        logger.warning(f"{self.name}: inconclusive ({reason})")
        return CheckReport(
            name=self.name,
            passed=False,
            statistic=statistic,
            threshold=threshold,
            details=reason,
            verdict=Verdict.INCONCLUSIVE
        )
