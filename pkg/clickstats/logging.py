import json
import logging
import logging.config
from datetime import datetime
from functools import lru_cache
from pathlib import Path

from yaml import safe_load

DEFAULT_LOG_CONFIG: Path = Path(__file__).with_name("logconf.yaml")


@lru_cache
def _configure(path: Path) -> None:
    with open(path, "r", encoding="utf-8") as file:
        log_config = safe_load(file)

    logging.config.dictConfig(log_config)


def getLogger(name: str = "clickstats") -> logging.Logger:
    """Configures logging (once per config file) and returns a logger with the specified name.

    Parameters:
    name (str): The name of the logger, e.g. ``clickstats.exact``.

    Returns:
    logging.Logger: The logger with the specified name.
    """
    # Imported here, settings themselves log nothing but depend on this module indirectly
    from clickstats.config import get_settings

    _configure(get_settings().log_config or DEFAULT_LOG_CONFIG)
    return logging.getLogger(name)


class JsonFormatter(logging.Formatter):
    """Formats each log record as a single JSON object."""

    # Attributes every LogRecord carries; anything else was passed via `extra=`
    standard_attrs: frozenset[str] = frozenset(
        {
            "name",
            "msg",
            "args",
            "levelname",
            "levelno",
            "pathname",
            "filename",
            "module",
            "exc_info",
            "exc_text",
            "stack_info",
            "lineno",
            "funcName",
            "created",
            "msecs",
            "relativeCreated",
            "thread",
            "threadName",
            "processName",
            "process",
            "taskName",
            "message",
            "asctime",
        }
    )

    def format(self, record: logging.LogRecord) -> str:
        """Formats the log record as a JSON string.

        Parameters:
        record (logging.LogRecord): The log record to format.

        Returns:
        str: The log record as a JSON string.
        """
        log_data: dict[str, object] = {
            "time": datetime.fromtimestamp(record.created).strftime("%Y-%m-%d %H:%M:%S"),
            "level": record.levelname,
            "message": record.getMessage(),
            "name": record.name,
        }

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        extra = {k: v for k, v in record.__dict__.items() if k not in self.standard_attrs}
        if extra:
            log_data.update(extra)

        # numpy scalars and paths are not JSON-native
        return json.dumps(log_data, default=str)
