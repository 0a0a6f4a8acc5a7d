"""
OptionMarket Path Security Module

The output directory comes from the user (--output-dir or run.output_dir in
the experiment file); artifact names come from the pipelines. Both are
checked here before anything is written.

Security Notes:
- The output directory is resolved to an absolute path and must not sit
  under an existing regular file
- Artifact names must be bare file names; separators and '..' are refused
- A final containment check keeps every artifact inside its run directory
- Violations raise ConfigError, so the CLI exits with code 2
"""

import os

from core.utils.errors import ConfigError


def secure_output_dir(path: str) -> str:
    """
    Resolve a user-supplied output directory.

    Args:
        path: Directory from the command line or the experiment file

    Returns:
        Absolute, normalised directory path (it may not exist yet)
    """
    if path is None or not str(path).strip():
        raise ConfigError("output directory must not be empty")
    if "\x00" in path:
        raise ConfigError("output directory contains a NUL byte")

    resolved = os.path.abspath(os.path.expanduser(path))
    existing = resolved
    while not os.path.exists(existing):
        existing = os.path.dirname(existing)
    if not os.path.isdir(existing):
        raise ConfigError(f"output directory {path!r} lies under the file {existing!r}")
    return resolved


def get_secure_path(file_name: str, base_dir: str) -> str:
    """
    Path of one artifact inside a run directory.

    Args:
        file_name: Bare artifact name, e.g. 'forward.csv'
        base_dir: Run directory that must contain the result

    Returns:
        Absolute path inside base_dir
    """
    if not file_name or file_name in (".", ".."):
        raise ConfigError(f"invalid artifact name {file_name!r}")
    if "/" in file_name or "\\" in file_name or os.path.isabs(file_name):
        raise ConfigError(f"artifact name {file_name!r} must not contain a directory part")

    abs_base_dir = os.path.abspath(base_dir)
    abs_file_path = os.path.abspath(os.path.join(abs_base_dir, file_name))
    if os.path.dirname(abs_file_path) != abs_base_dir:
        raise ConfigError(f"artifact path escapes the run directory: {abs_file_path}")
    return abs_file_path
