import logging
import sys

from src.config.settings import settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logger(name: str, level: str = None) -> logging.Logger:
    """
    Configure the root handler once and return a named logger

    Args:
        name: Logger name, usually __name__
        level: Overrides settings.LOG_LEVEL

    Returns:
        Configured logger
    """
    root = logging.getLogger()
    if not any(getattr(h, "_subeig", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._subeig = True
        root.addHandler(handler)

    root.setLevel((level or settings.LOG_LEVEL).upper())
    return logging.getLogger(name)
