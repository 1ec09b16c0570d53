"""
Configuration management module for DualOpt.

This module provides centralized configuration management including:
- General limits (statevector and oracle caps, worker count)
- Sampler defaults (TFIM couplings, Trotter step)
- Optimizer settings (sweeps, inner solver, overfitting guard)
- Advanced options (logging, progress bars, tolerances)
"""

import configparser
import os
from typing import Dict

from dotenv import load_dotenv

from .errors import ConfigError
from .logger import get_logger, get_logger_instance

load_dotenv()

DEFAULT_CONFIG = {
    "GENERAL": {
        "state_cap": "14",
        "oracle_cap": "8",
        "n_workers": "1",
        "output_dir": "./data",
    },
    "SAMPLER": {
        "j": "0.5236",
        "h": "1.0",
        "dt": "0.1",
        "steps": "0",
    },
    "OPTIMIZER": {
        "n_sweeps": "20",
        "max_inner_iters": "50",
        "grad_tol": "1e-8",
        "overfit_patience": "1",
        "overfit_ratio": "1.02",
        "split_seed": "0",
        "inner_solver": "lbfgs",
    },
    "ADVANCED": {
        "verbose_logging": "false",
        "show_progress": "true",
        "max_log_size": "10",
        "duality_tol": "1e-10",
    },
}


class ConfigManager:
    """
    Configuration manager for DualOpt.

    Manages all settings read from the INI file. Provides methods for loading,
    saving and typed access to configuration values.
    """

    def __init__(self, config_file: str = None):
        """
        Initialize the configuration manager.

        Args:
            config_file (str, optional): Path to the configuration file.
                Defaults to $DUALOPT_CONFIG, then config.ini.
        """
        if config_file is None:
            config_file = os.environ.get("DUALOPT_CONFIG", "config.ini")
        self.config_file = config_file
        self.config = configparser.ConfigParser()
        self.logger = get_logger("ConfigManager")
        self.load_config()

    def load_config(self):
        """
        Load configuration from file.

        Falls back to the built-in defaults if the file doesn't exist; the
        defaults are kept in memory and only written by create_default_config.
        """
        self.config.read_dict(DEFAULT_CONFIG)
        if os.path.exists(self.config_file):
            self.config.read(self.config_file, encoding="utf-8")
            self.logger.debug(f"Configuration file loaded: {self.config_file}")
        else:
            self.logger.debug(
                f"Configuration file {self.config_file} not found, using defaults"
            )
        logger_instance = get_logger_instance()
        logger_instance.set_verbose(self.get_bool("ADVANCED", "verbose_logging"))
        logger_instance.set_max_log_size(self.get_int("ADVANCED", "max_log_size"))

    def create_default_config(self):
        """
        Write the default configuration to the config file.
        """
        self.logger.info("Creating default configuration")
        self.config = configparser.ConfigParser()
        self.config.read_dict(DEFAULT_CONFIG)
        self.save_config()
        self.logger.info(f"Default configuration written to {self.config_file}")

    def save_config(self):
        """
        Save current configuration to file.
        """
        with open(self.config_file, "w", encoding="utf-8") as f:
            self.config.write(f)
        self.logger.debug(f"Configuration file saved: {self.config_file}")

    def get(self, section: str, key: str, fallback: str = None) -> str:
        """
        Get configuration value.

        Args:
            section (str): Configuration section name
            key (str): Configuration option name
            fallback (str, optional): Default value if option not found

        Returns:
            str: Configuration value or fallback
        """
        return self.config.get(section, key, fallback=fallback)

    def set(self, section: str, key: str, value: str):
        """
        Set configuration value and persist it.

        Args:
            section (str): Configuration section name
            key (str): Configuration option name
            value (str): Value to set
        """
        if not self.config.has_section(section):
            self.config.add_section(section)
            self.logger.debug(f"New configuration section added: [{section}]")

        old_value = self.config.get(section, key, fallback=None)
        self.config.set(section, key, value)

        if old_value != value:
            get_logger_instance().log_config_change(section, key, value)

        self.save_config()

    def get_int(self, section: str, key: str) -> int:
        """
        Get an integer setting.

        Raises:
            ConfigError: If the stored value is not an integer
        """
        raw = self.get(section, key, DEFAULT_CONFIG[section][key])
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}")

    def get_float(self, section: str, key: str) -> float:
        """
        Get a float setting.

        Raises:
            ConfigError: If the stored value is not a number
        """
        raw = self.get(section, key, DEFAULT_CONFIG[section][key])
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}")

    def get_bool(self, section: str, key: str) -> bool:
        """
        Get a boolean setting ("true"/"false", case-insensitive).
        """
        raw = self.get(section, key, DEFAULT_CONFIG[section][key])
        return raw.strip().lower() in ("true", "1", "yes", "on")

    def get_state_cap(self) -> int:
        return self.get_int("GENERAL", "state_cap")

    def get_oracle_cap(self) -> int:
        return self.get_int("GENERAL", "oracle_cap")

    def get_n_workers(self) -> int:
        return max(1, self.get_int("GENERAL", "n_workers"))

    def get_output_dir(self) -> str:
        """
        Get the default output directory, creating it if needed.

        Returns:
            str: Output directory path
        """
        path = self.get("GENERAL", "output_dir", "./data")
        os.makedirs(path, exist_ok=True)
        return path

    def get_sampler_settings(self) -> Dict[str, float]:
        """
        Get the TFIM defaults.

        Returns:
            dict: J, h, dt and steps
        """
        return {
            "J": self.get_float("SAMPLER", "j"),
            "h": self.get_float("SAMPLER", "h"),
            "dt": self.get_float("SAMPLER", "dt"),
            "steps": self.get_int("SAMPLER", "steps"),
        }

    def get_optimizer_settings(self) -> dict:
        """
        Get all optimizer settings.

        Returns:
            dict: Keyword arguments accepted by OptimizerConfig
        """
        settings = {
            "n_sweeps": self.get_int("OPTIMIZER", "n_sweeps"),
            "max_inner_iters": self.get_int("OPTIMIZER", "max_inner_iters"),
            "grad_tol": self.get_float("OPTIMIZER", "grad_tol"),
            "overfit_patience": self.get_int("OPTIMIZER", "overfit_patience"),
            "overfit_ratio": self.get_float("OPTIMIZER", "overfit_ratio"),
            "rng_seed": self.get_int("OPTIMIZER", "split_seed"),
            "inner_solver": self.get("OPTIMIZER", "inner_solver", "lbfgs").strip(),
            "duality_tol": self.get_float("ADVANCED", "duality_tol"),
        }
        return settings

    def show_progress(self) -> bool:
        return self.get_bool("ADVANCED", "show_progress")
