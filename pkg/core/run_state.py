import logging
import uuid
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

# Step status constants
STATUS_PENDING = "pending"
STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"


class RunState:
    """
    Event log of one experiment run (a scan, a classification or a ping-pong search).

    Pipelines record their steps here; the CLI attaches the summary to its
    JSON output when --debug is on.
    """
    def __init__(self, command: str, parameters: Optional[Dict[str, Any]] = None):
        self.run_id: str = str(uuid.uuid4())
        self.start_time: datetime = datetime.now()
        self.command: str = command
        self.parameters: Dict[str, Any] = dict(parameters or {})

        self.steps: List[Dict[str, Any]] = []
        self.run_log: List[Tuple[datetime, str, Dict[str, Any]]] = []
        self.failure_reason: Optional[str] = None
        self.error_count: int = 0

        self.log_event("RunState initialized.", {"command": command, "run_id": self.run_id}, level="DEBUG")

    def log_event(self, message: str, details: Optional[Dict[str, Any]] = None, level: str = "INFO"):
        log_details = details or {}
        self.run_log.append((datetime.now(), message, log_details))

        level = level.upper()
        if level == "ERROR":
            logger.error(f"[Run Log] {message} {log_details if log_details else ''}")
        elif level == "WARNING":
            logger.warning(f"[Run Log] {message} {log_details if log_details else ''}")
        elif level == "DEBUG":
            logger.debug(f"[Run Log] {message} {log_details if log_details else ''}")
        else:
            logger.info(f"[Run Log] {message} {log_details if log_details else ''}")

    def start_step(self, name: str, payload: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        step = {"name": name, "status": STATUS_PENDING, "payload": payload or {},
                "started_at": datetime.now().isoformat()}
        self.steps.append(step)
        self.log_event(f"Step started: {name}", payload, level="DEBUG")
        return step

    def complete_step(self, step: Dict[str, Any], summary: Optional[str] = None, status: str = STATUS_COMPLETED):
        step["status"] = status
        step["summary"] = summary or "N/A"
        step["completed_at"] = datetime.now().isoformat()
        level = "INFO"
        if status == STATUS_FAILED:
            self.error_count += 1
            level = "WARNING"
        self.log_event(f"Step {step['name']} {status}", {"summary": step["summary"]}, level=level)

    def fail(self, reason: str, details: Optional[Dict[str, Any]] = None):
        """Records the terminal failure reason of the run (first one wins)."""
        if self.failure_reason is None:
            self.failure_reason = reason
        self.log_event(f"Run failed: {reason}", details, level="WARNING")

    def summary(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "command": self.command,
            "parameters": self.parameters,
            "started_at": self.start_time.isoformat(),
            "elapsed_seconds": (datetime.now() - self.start_time).total_seconds(),
            "steps": [{k: v for k, v in s.items() if k != "payload"} for s in self.steps],
            "failure_reason": self.failure_reason,
            "error_count": self.error_count,
        }
