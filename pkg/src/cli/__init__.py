# Command-line layer: run-config resolution and report rendering
from .commands import cmd_estimate, cmd_init_config, cmd_oracle, cmd_sample, cmd_scan
from .run_config import RunConfig, build_run_config

__all__ = [
    "RunConfig",
    "build_run_config",
    "cmd_estimate",
    "cmd_init_config",
    "cmd_oracle",
    "cmd_sample",
    "cmd_scan",
]
