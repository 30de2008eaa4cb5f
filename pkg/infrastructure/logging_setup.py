# -*- coding: utf-8 -*-
# Logging configuration for the library and the hdqr command line.
import datetime
import json
import logging
from typing import Optional

PLAIN_FORMAT = "%(asctime)s - [hdqr] - %(message)s"


class JsonFormatter(logging.Formatter):
    def format(self, record):
        log_entry = {
            "timestamp": datetime.datetime.now().isoformat(),
            "level": record.levelname,
            "message": record.getMessage(),
            "component": getattr(record, "component", record.name),
        }
        return json.dumps(log_entry)


def configure_logging(level: int = logging.INFO, json_format: bool = False,
                      stream=None) -> logging.Logger:
    """
    Installs a single stderr handler on the root logger.

    Calling it again replaces the previous handler, so tests and repeated
    CLI invocations in one process do not duplicate output.
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_hdqr_handler", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(stream)
    handler.setFormatter(JsonFormatter() if json_format else logging.Formatter(PLAIN_FORMAT))
    handler._hdqr_handler = True
    root.addHandler(handler)
    root.setLevel(level)
    return root


def log_info(message: str, component: str = "hdqr", logger: Optional[logging.Logger] = None):
    (logger or logging.getLogger("hdqr")).info(message, extra={"component": component})
