from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

from ..utils.output import json_number


@dataclass
class IterationRecord:
    j: int
    sup_value: float
    sup_ratio: float
    monotone: bool
    change: float = float("nan")
    ln_rho: Optional[float] = None
    bound: Optional[float] = None


@dataclass
class IterationTrace:
    """Per-iteration sup-norms, ratios and monotonicity flags of a scheme.

    ``direction`` is "ascending" (iterates should increase) or "descending".
    ``sup_ratio`` is sup(u_j/u_{j−1}) for the fixed-point schemes and
    ρ_j = sup(v_j/u) for the contraction experiment.
    """

    direction: str = "ascending"
    records: List[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return self.records[-1].j if self.records else 0

    @property
    def monotone(self) -> bool:
        return all(r.monotone for r in self.records)

    def add(self, record: IterationRecord) -> None:
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "j": [r.j for r in self.records],
                "sup_value": [r.sup_value for r in self.records],
                "sup_ratio": [r.sup_ratio for r in self.records],
                "monotone": [r.monotone for r in self.records],
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "direction": self.direction,
            "converged": self.converged,
            "iterations": self.iterations,
            "monotone": self.monotone,
            "records": [
                {k: json_number(v) if isinstance(v, float) else v for k, v in asdict(r).items()}
                for r in self.records
            ],
        }
