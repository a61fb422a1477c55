import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Union


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def setup_logging(log_dir: Path, level: str = "INFO") -> None:
    _ensure_parent(log_dir / "toolkit.log")
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        handlers=[
            logging.FileHandler(log_dir / "toolkit.log", encoding="utf-8"),
            logging.StreamHandler(),
        ],
    )


def append_jsonl(file_path: Union[str, Path], record: Dict[str, Any]) -> None:
    path = Path(file_path)
    _ensure_parent(path)
    record = {
        **record,
        "timestamp": datetime.utcnow().isoformat(timespec="seconds") + "Z",
    }
    with path.open("a", encoding="utf-8") as f:
        f.write(json.dumps(record, ensure_ascii=False) + "\n")


def log_task_event(
    file_path: Union[str, Path],
    *,
    task: str,
    label: str,
    status: int,
    document_sha256: str,
    duration_ms: float = 0.0,
    artifacts: Optional[list] = None,
    error: Optional[str] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> None:
    rec: Dict[str, Any] = {
        "type": "task",
        "task": task,
        "label": label,
        "status": int(status),
        "document_sha256": document_sha256,
        "duration_ms": round(float(duration_ms), 1),
    }
    if artifacts:
        rec["artifacts"] = [str(a) for a in artifacts]
    if error:
        rec["error"] = error
    if extra:
        rec.update(extra)
    append_jsonl(file_path, rec)
