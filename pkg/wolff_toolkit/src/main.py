"""Command-line front door: ``toolkit run <task-document> [--threads N]``.

Exit status 0 on success, 2 on validation errors (bad documents, parameters
outside a module's preconditions), 3 on numerical failures; failures leave a
``<task>.<label>.error.json`` next to the regular artifacts.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Tuple

import toml
from pydantic import ValidationError

try:
    from colorama import Fore, Style, init

    init(autoreset=True)
    HAS_COLORAMA = True
except ImportError:
    HAS_COLORAMA = False

from wolff_toolkit import __version__

from .tasks import TaskContext, document_sha256, parse_task_document, run_task
from .utils.config_loader import get_project_root, get_settings, output_dir_override, save_json
from .utils.errors import NumericalFailure, ToolkitError, ValidationFailure
from .utils.logging_utils import log_task_event, setup_logging
from .utils.output import ArtifactMeta

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

logger = logging.getLogger("main")


def _colored(text: str, color: str) -> str:
    if not HAS_COLORAMA:
        return text
    return f"{getattr(Fore, color.upper(), '')}{text}{Style.RESET_ALL}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toolkit", description="Wolff potentials and p-Laplace solvers")
    parser.add_argument("--version", action="version", version=f"wolff_toolkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="Run one task document")
    run.add_argument("document", type=Path, help="Path to the task document (TOML)")
    run.add_argument("--threads", type=int, default=None, help="Worker threads for mesh-parallel evaluation")
    run.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    run.add_argument("--log-dir", type=Path, default=None, help="Directory for toolkit.log and task_history.jsonl")
    return parser


def _error_payload(exc: BaseException) -> dict:
    payload = {"error_type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ToolkitError):
        payload.update(exc.payload())
    return payload


def _safe_token(value: object, fallback: str) -> str:
    text = str(value) if value is not None else ""
    return text if text and not any(ch in text for ch in "/\\ ") else fallback


def _document_names(text: str) -> Tuple[str, str, Path]:
    """Task, label and output directory of a document that may still fail validation."""
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError:
        raw = {}
    task, label = (_safe_token(raw.get(key), fallback) for key, fallback in (("task", "unknown"), ("label", "run")))
    return task, label, Path(str(raw.get("output", "output")))


def run_document(document: Path, threads: Optional[int] = None, log_dir: Optional[Path] = None) -> int:
    """Run one task document; returns the exit status."""
    log_dir = log_dir or get_project_root() / "logs"
    started = time.perf_counter()
    task, label, sha, output_dir = "unknown", "run", "", None
    artifacts: List[Path] = []
    status = EXIT_OK
    error: Optional[BaseException] = None
    try:
        text = document.read_text(encoding="utf-8")
        sha = document_sha256(text)
        task, label, output_dir = _document_names(text)
        output_dir = output_dir_override() or output_dir
        doc = parse_task_document(text)
        ctx = TaskContext(
            doc=doc,
            base_dir=document.resolve().parent,
            output_dir=output_dir,
            meta=ArtifactMeta(task, label, sha),
            threads=threads or get_settings().threads,
        )
        artifacts = run_task(ctx)
    except (ValidationFailure, ValidationError, FileNotFoundError) as exc:
        status, error = EXIT_VALIDATION, exc
    except NumericalFailure as exc:
        status, error = EXIT_NUMERICAL, exc

    if error is not None:
        logger.error("Task %s failed (%s): %s", task, type(error).__name__, error)
        if output_dir is not None:
            output_dir.mkdir(parents=True, exist_ok=True)
            path = output_dir / f"{task}.{label}.error.json"
            save_json(path, {"meta": ArtifactMeta(task, label, sha).to_dict(), **_error_payload(error)})
            artifacts = [path]
    log_task_event(
        log_dir / "task_history.jsonl",
        task=task,
        label=label,
        status=status,
        document_sha256=sha,
        duration_ms=(time.perf_counter() - started) * 1000.0,
        artifacts=artifacts,
        error=None if error is None else f"{type(error).__name__}: {error}",
    )
    return status


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log_dir = args.log_dir or get_project_root() / "logs"
    setup_logging(log_dir, args.log_level)
    status = run_document(args.document, args.threads, log_dir)
    if status == EXIT_OK:
        print(_colored(f"OK: {args.document}", "green"))
    else:
        print(_colored(f"FAILED ({status}): {args.document}", "red"), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
