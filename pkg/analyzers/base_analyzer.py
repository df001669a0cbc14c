import logging
from abc import ABC
from typing import Any, Optional

from config import settings

logger = logging.getLogger(__name__)

_INPUT_PREVIEW = 200
_OUTPUT_PREVIEW = 500


def _preview(value: Any, limit: int) -> str:
    text = str(value)
    return text if len(text) <= limit else text[:limit] + '...'


class BaseAnalyzer(ABC):
    """
    Abstract base class for the analysis units (scanner, classifier).

    Holds a per-instance config dict whose keys override the module-level
    settings of the same name.
    """

    def __init__(self, analyzer_name: str, config: Optional[dict] = None, jobs: Optional[int] = None):
        """
        Args:
            analyzer_name (str): Prefix for log lines.
            config (Optional[dict]): Overrides of settings constants, keyed by constant name.
            jobs (Optional[int]): Worker threads for parallel stages; settings.DEFAULT_JOBS if None.
        """
        self.analyzer_name = analyzer_name
        self.config = config or {}
        self.jobs = settings.DEFAULT_JOBS if jobs is None else jobs
        unknown = [k for k in self.config if not hasattr(settings, k)]
        if unknown:
            logger.warning(f"[{self.analyzer_name}] Config keys with no matching setting: {unknown}")
        logger.debug(f"[{self.analyzer_name}] initialized, overrides: {sorted(self.config)}")

    def _log_input(self, **fields: Any):
        shown = {k: _preview(v, _INPUT_PREVIEW) for k, v in fields.items()}
        logger.debug(f"[{self.analyzer_name}] input {shown}")

    def _log_output(self, output: Any):
        logger.debug(f"[{self.analyzer_name}] output {_preview(output, _OUTPUT_PREVIEW)}")

    def _get_config_value(self, key: str, default: Any = None) -> Any:
        """Instance override first, then the settings constant `key`, then `default`."""
        if key in self.config:
            return self.config[key]
        return getattr(settings, key, default)
