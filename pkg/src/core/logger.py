"""
Centralized logging system for the DualOpt toolkit.

This module provides logging functionality including:
- Console logging on stderr (stdout is reserved for JSON reports)
- Rotating general and error log files
- A dedicated optimizer trace log (sweeps, overfitting guard, selections)
"""

import logging
import os
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

DEFAULT_LOG_DIR = "logs"


class Logger:
    """
    Centralized logging manager for DualOpt.

    Provides multiple logging handlers for different purposes:
    - Console output for immediate feedback
    - Rotating file logs for persistence
    - A non-propagating trace logger for optimizer events
    """

    def __init__(self, name="DualOpt", log_dir=None, verbose=False):
        """
        Initialize the logger with multiple handlers.

        Args:
            name (str): Logger name identifier
            log_dir (str, optional): Directory for log files. Falls back to the
                DUALOPT_LOG_DIR environment variable, then to ./logs. An empty
                string disables file logging.
            verbose (bool): Show DEBUG messages on the console
        """
        self.name = name
        if log_dir is None:
            log_dir = os.environ.get("DUALOPT_LOG_DIR", DEFAULT_LOG_DIR)
        self.log_dir = log_dir

        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        self.trace_logger = logging.getLogger(f"{name}.optimization")
        self.trace_logger.setLevel(logging.INFO)
        self.trace_logger.propagate = False  # 不向父级记录器传播日志

        # Avoid adding handlers multiple times
        if not self.logger.handlers:
            self._setup_handlers(verbose)

    def _setup_handlers(self, verbose=False):
        """
        Set up logging handlers for different output destinations.

        Configures the console handler, and when a log directory is set, the
        general log file, the error log file and the optimizer trace file.
        """
        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
        console_formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s", datefmt="%H:%M:%S"
        )
        console_handler.setFormatter(console_formatter)
        self.logger.addHandler(console_handler)

        if not self.log_dir:
            self.trace_logger.addHandler(logging.NullHandler())
            return

        log_dir = Path(self.log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        general_handler = RotatingFileHandler(
            log_dir / "app.log",
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding="utf-8",
        )
        general_handler.setLevel(logging.INFO)
        general_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
        self.logger.addHandler(general_handler)

        error_handler = RotatingFileHandler(
            log_dir / "error.log",
            maxBytes=5 * 1024 * 1024,  # 5MB
            backupCount=3,
            encoding="utf-8",
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(
            logging.Formatter(
                "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"  # noqa: E501
            )
        )
        self.logger.addHandler(error_handler)

        # 优化过程详细日志，按天分文件
        today = datetime.now().strftime("%Y%m%d")
        trace_handler = RotatingFileHandler(
            log_dir / f"optimization_{today}.log",
            maxBytes=20 * 1024 * 1024,  # 20MB
            backupCount=10,
            encoding="utf-8",
        )
        trace_handler.setLevel(logging.INFO)
        trace_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")
        )
        self.trace_logger.addHandler(trace_handler)

    def set_verbose(self, verbose):
        """
        Switch console verbosity at runtime.

        Args:
            verbose (bool): Show DEBUG messages on the console
        """
        for handler in self.logger.handlers:
            if type(handler) is logging.StreamHandler:
                handler.setLevel(logging.DEBUG if verbose else logging.INFO)

    def set_max_log_size(self, size_mb):
        """
        Resize the general log file limit.

        Args:
            size_mb (int): Maximum size of app.log in MB before rotation
        """
        for handler in self.logger.handlers:
            if isinstance(handler, RotatingFileHandler) and handler.level == logging.INFO:
                handler.maxBytes = int(size_mb) * 1024 * 1024

    def _build_tag_prefix(self, tag=None):
        """
        Build the "[tag] " prefix used to tell observables and directions apart.

        Args:
            tag (str, optional): Observable label or split direction

        Returns:
            str: Formatted prefix, empty when no tag is given
        """
        if not tag:
            return ""
        if len(tag) > 24:
            return f"[{tag[:22]}..] "
        return f"[{tag}] "

    def log_sweep_detail(self, event_type, message="", **kwargs):
        """
        Record an optimizer event in the dedicated trace log.

        Args:
            event_type (str): One of 'sweep', 'qubit', 'overfit', 'selection',
                'split'; anything else logs ``message`` verbatim
            message (str): Free-form message for unknown event types
            **kwargs: Event fields (sweep, qubit, train, validation, tag, ...)

        Returns:
            str: The formatted message, also echoed to the debug console
        """
        prefix = self._build_tag_prefix(kwargs.get("tag"))

        if event_type == "sweep":
            formatted_msg = (
                f"sweep {kwargs.get('sweep')} -- train={kwargs.get('train'):.6g} "
                f"validation={kwargs.get('validation'):.6g}"
            )
        elif event_type == "qubit":
            formatted_msg = (
                f"qubit {kwargs.get('qubit')} -- objective "
                f"{kwargs.get('before'):.6g} -> {kwargs.get('after'):.6g} "
                f"({kwargs.get('iterations', 0)} iterations)"
            )
        elif event_type == "overfit":
            formatted_msg = (
                f"overfitting guard at sweep {kwargs.get('sweep')} -- "
                f"validation {kwargs.get('validation'):.6g} > "
                f"best {kwargs.get('best'):.6g} x {kwargs.get('ratio')}"
            )
        elif event_type == "selection":
            formatted_msg = (
                f"selected {kwargs.get('selection')} duals -- "
                f"sigma optimized={kwargs.get('optimized'):.6g} "
                f"canonical={kwargs.get('canonical'):.6g}"
            )
        elif event_type == "split":
            formatted_msg = (
                f"split {kwargs.get('n_a')}/{kwargs.get('n_b')} shots "
                f"(seed {kwargs.get('seed')})"
            )
        else:
            formatted_msg = message

        self.trace_logger.info(f"{prefix}{formatted_msg}")
        self.logger.debug(f"{prefix}{formatted_msg}")
        return formatted_msg

    def log_config_change(self, section, key, value):
        """
        Log configuration change event.

        Args:
            section (str): Configuration section name
            key (str): Configuration key name
            value (str): New configuration value
        """
        self.logger.info(f"Configuration changed: [{section}] {key} = {value}")

    def log_file_operation(self, operation, file_path, details=""):
        """
        Log file system operation.

        Args:
            operation (str): Operation type (write, read, ...)
            file_path (str): Path of the file
            details (str, optional): Additional operation details
        """
        message = f"File {operation}: {file_path}"
        if details:
            message += f" - {details}"
        self.logger.info(message)

    def log_exception(self, message, exc_info=True):
        """
        Log exception information with traceback.

        Args:
            message (str): Exception message to log
            exc_info (bool): Whether to include exception traceback
        """
        self.logger.exception(message, exc_info=exc_info)


# Global logger instance
_logger_instance = None


def get_logger_instance(name="DualOpt"):
    """
    Get or create the process-wide Logger manager.

    Args:
        name (str): Logger name identifier, only used on first call

    Returns:
        Logger: The singleton manager
    """
    global _logger_instance
    if _logger_instance is None:
        _logger_instance = Logger(name)
    return _logger_instance


def get_logger(name="DualOpt"):
    """
    Get the configured stdlib logger.

    Creates the singleton manager if none exists, otherwise returns the
    existing instance's logger.

    Args:
        name (str): Logger name identifier

    Returns:
        logging.Logger: Configured logger instance
    """
    return get_logger_instance(name).logger


def log_sweep_detail(event_type, message="", **kwargs):
    """
    Record an optimizer event in the trace log of the singleton manager.

    Args:
        event_type (str): Event type, see Logger.log_sweep_detail
        message (str): Free-form message
        **kwargs: Event fields

    Returns:
        str: The formatted message
    """
    return get_logger_instance().log_sweep_detail(event_type, message, **kwargs)
