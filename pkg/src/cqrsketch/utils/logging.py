"""
Logging configuration for cqrsketch.

Experiment runs log to a file in a 'logs' subdirectory next to the run's
output file, plus INFO and above to stderr. Log filename format:
cqrsketch_{output_stem}_{timestamp}.log

Only the 5 most recent 'cqrsketch_' log files are kept in a logs directory.
Before setup_logger() is called every logging call is a no-op, so the library
stays silent when imported by other code.
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

LOGGER_NAME = "cqrsketch"
LOG_PREFIX = "cqrsketch_"


class CQRLogger:
    """Centralized logger for cqrsketch runs."""

    _logger: Optional[logging.Logger] = None
    _current_log_file: Optional[Path] = None

    @classmethod
    def _cleanup_old_logs(cls, logs_dir: Path, keep_count: int = 5) -> None:
        """Remove old log files, keeping only the most recent ones."""
        log_files = sorted(
            logs_dir.glob(f"{LOG_PREFIX}*.log"),
            key=lambda p: p.stat().st_mtime,
            reverse=True,
        )
        for old_log in log_files[keep_count:]:
            try:
                old_log.unlink()
            except OSError:
                pass

    @classmethod
    def setup_logger(
        cls, output_path: Union[str, Path], log_level: int = logging.INFO
    ) -> logging.Logger:
        """
        Setup logger for one experiment run.

        Args:
            output_path: Path of the run's main output file (CSV or JSON)
            log_level: Logging level for the log file (default: INFO)

        Returns:
            Configured logger instance
        """
        output = Path(output_path)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")[:17]

        logs_dir = output.parent / "logs"
        logs_dir.mkdir(parents=True, exist_ok=True)
        log_path = logs_dir / f"{LOG_PREFIX}{output.stem}_{timestamp}.log"

        if cls._logger:
            for handler in cls._logger.handlers[:]:
                cls._logger.removeHandler(handler)
                handler.close()

        cls._logger = logging.getLogger(LOGGER_NAME)
        cls._logger.setLevel(log_level)
        cls._logger.propagate = False

        file_handler = logging.FileHandler(log_path, mode="w", encoding="utf-8")
        file_handler.setLevel(log_level)

        console_handler = logging.StreamHandler()
        console_handler.setLevel(max(log_level, logging.INFO))

        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        file_handler.setFormatter(formatter)
        console_handler.setFormatter(formatter)

        cls._logger.addHandler(file_handler)
        cls._logger.addHandler(console_handler)
        cls._current_log_file = log_path

        cls._logger.info(f"cqrsketch logging started for output: {output}")
        cls._logger.info(f"Log file: {log_path}")

        # after creating the new file so it counts towards keep_count
        cls._cleanup_old_logs(logs_dir, keep_count=5)

        return cls._logger

    @classmethod
    def get_logger(cls) -> Optional[logging.Logger]:
        """Get the current logger instance."""
        return cls._logger

    @classmethod
    def get_log_file_path(cls) -> Optional[Path]:
        """Get the current log file path."""
        return cls._current_log_file

    @classmethod
    def info(cls, message: str) -> None:
        if cls._logger:
            cls._logger.info(message)

    @classmethod
    def warning(cls, message: str) -> None:
        if cls._logger:
            cls._logger.warning(message)

    @classmethod
    def error(cls, message: str) -> None:
        if cls._logger:
            cls._logger.error(message)

    @classmethod
    def debug(cls, message: str) -> None:
        if cls._logger:
            cls._logger.debug(message)

    @classmethod
    def success(cls, message: str) -> None:
        """Log success message (using info level)."""
        if cls._logger:
            cls._logger.info(f"✅ {message}")

    @classmethod
    def cleanup(cls) -> None:
        """Detach and close all handlers."""
        if cls._logger:
            for handler in cls._logger.handlers[:]:
                cls._logger.removeHandler(handler)
                handler.close()
            cls._logger = None
            cls._current_log_file = None
