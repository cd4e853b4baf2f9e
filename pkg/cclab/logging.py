"""Log levels and console formatting for the command-line interface"""
import logging
import os
import sys
from typing import TextIO

IMPORTANT = 25  # run summaries: shown by default, silenced by "-q"
logging.addLevelName(IMPORTANT, "INFO")


class CLIFormatter(logging.Formatter):
    """Console formatter that colors numerical details and problems

    Parameters
    ----------
    colorize : bool, optional
        Emit ANSI escape codes. Default is True.

    Notes
    -----
    Color scheme h/t https://stackoverflow.com/a/56944256
    """

    grey = "\x1b[2;20m"
    yellow = "\x1b[33;20m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"

    COLORS = {
        logging.DEBUG: grey,
        logging.WARNING: yellow,
        logging.ERROR: bold_red,
        logging.CRITICAL: bold_red,
    }

    def __init__(self, colorize: bool = True):
        super().__init__("%(message)s")
        self.colorize = colorize

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        if not self.colorize:
            if record.levelno >= logging.WARNING:
                return f"{record.levelname.lower()}: {message}"
            return message
        color = self.COLORS.get(record.levelno)
        return message if color is None else color + message + self.reset


def verbosity_to_log_level(verbosity: int) -> int:
    """Convert a verbosity level (number of `-v`s minus number of `-q`s) to
    a logging level

    Parameters
    ----------
    verbosity: int
        A verbosity of 0 shows run summaries (the `IMPORTANT` level) and
        warnings, 1 adds per-operation progress and 2 adds the numerical
        details (bracket refinements, grid sizes, fit conditioning).

    Returns
    -------
    int
        The corresponding log level that should be set

    Notes
    -----
    The default level sits just above INFO, which lets the `IMPORTANT`
    summaries through at `verbosity = 0` and silences them at
    `verbosity = -1` (`-q`).
    """
    return logging.INFO + 1 - 10 * verbosity


def attach_cli_handler(
    logger: logging.Logger, verbosity: int, stream: TextIO | None = None
) -> logging.Handler:
    """Route a logger to the console at the level given by the verbosity

    Parameters
    ----------
    logger : Logger
        The logger to attach to (usually the package's root logger)
    verbosity : int
        See `verbosity_to_log_level`
    stream : file-like, optional
        Where to write. Default is stderr, which keeps stdout free for the
        JSON reports.

    Returns
    -------
    Handler
        The attached handler, so the caller can detach it again

    Notes
    -----
    Colors are only used when the stream is a terminal and the NO_COLOR
    environment variable is unset.
    """
    stream = sys.stderr if stream is None else stream
    colorize = stream.isatty() and "NO_COLOR" not in os.environ
    handler = logging.StreamHandler(stream)
    handler.setFormatter(CLIFormatter(colorize))
    log_level = verbosity_to_log_level(verbosity)
    handler.setLevel(log_level)
    logger.setLevel(log_level)
    logger.addHandler(handler)
    return handler
