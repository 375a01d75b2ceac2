import logging
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional
from colorama import Fore, Style, init

from .constants import LOG_MAX_SIZE, LOG_BACKUP_COUNT

# Initialize colorama
init(autoreset=True)

# Third-party loggers that flood DEBUG output during replicate runs
QUIET_LOGGERS = ("filelock",)


class StreamToLogger:
    """
    File-like stream that forwards writes to a logger.

    Worker processes route stdout/stderr through it so numpy/scipy warnings
    end up in the log instead of interleaving with the parent's console.
    """
    def __init__(self, logger, level):
        self.logger = logger
        self.level = level

    def write(self, buf):
        for line in buf.rstrip().splitlines():
            self.logger.log(self.level, line.rstrip())

    def flush(self):
        pass


class ColoredFormatter(logging.Formatter):
    """Custom formatter for colored console logs."""

    COLORS = {
        logging.DEBUG: Fore.CYAN,
        logging.INFO: Fore.GREEN,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Fore.RED + Style.BRIGHT,
    }

    def format(self, record: logging.LogRecord) -> str:
        color = self.COLORS.get(record.levelno, Fore.WHITE)
        message = super().format(record)
        return f"{color}{message}{Style.RESET_ALL}"


def parse_level(name: str | int) -> int:
    """Translate a level name such as 'debug' into its logging constant."""
    if isinstance(name, int):
        return name
    level = logging.getLevelName(str(name).upper())
    return level if isinstance(level, int) else logging.INFO


def setup_logging(
    log_file: Optional[str] = None,
    level: int = logging.INFO,
    enable_console_logging: bool = True
) -> None:
    """
    Configure the root logger for the command line or a worker process.

    Console output goes to stderr so CSV written to stdout by other tools stays
    clean. The file handler, when log_file is given, rotates at LOG_MAX_SIZE and
    records the process name, which tells replicate workers apart.

    Example:
        >>> setup_logging(log_file="ziss.log", level=logging.DEBUG)
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Clear existing handlers to avoid duplication
    root_logger.handlers = []

    if enable_console_logging:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(ColoredFormatter(
            '%(asctime)s - %(levelname)s - %(message)s',
            datefmt='%H:%M:%S'
        ))
        root_logger.addHandler(console_handler)

    if log_file:
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=LOG_MAX_SIZE,
            backupCount=LOG_BACKUP_COUNT,
            encoding='utf-8'
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(processName)s - %(name)s - %(levelname)s - %(message)s'
        ))
        root_logger.addHandler(file_handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))

    logging.debug("Logging initialized")
