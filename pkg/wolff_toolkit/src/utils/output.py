from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from wolff_toolkit import __version__


@dataclass(frozen=True)
class ArtifactMeta:
    task: str
    label: str
    input_sha256: str

    def comment(self) -> str:
        return (
            f"# wolff_toolkit {__version__} task={self.task} "
            f"label={self.label} input_sha256={self.input_sha256}"
        )

    def to_dict(self) -> Dict[str, str]:
        return {
            "toolkit": "wolff_toolkit",
            "version": __version__,
            "task": self.task,
            "label": self.label,
            "input_sha256": self.input_sha256,
        }


def json_number(value: Optional[float]) -> Any:
    """JSON has no infinity; divergent values travel as the string "+inf"."""
    if value is None:
        return None
    value = float(value)
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return value


def write_csv(
    path: Path,
    df: pd.DataFrame,
    meta: Optional[ArtifactMeta] = None,
    extra_comments: Optional[List[str]] = None,
    float_format: str = "%.17g",
    header: bool = True,
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        if meta is not None:
            f.write(meta.comment() + "\n")
        for line in extra_comments or []:
            f.write(f"# {line}\n")
        df.to_csv(f, index=False, header=header, float_format=float_format, lineterminator="\n")
    return path
