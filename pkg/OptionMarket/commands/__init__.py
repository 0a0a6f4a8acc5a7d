"""
Commands package for OptionMarket.

Each CLI subcommand lives in commands/<category>/<name>/__init__.py and
registers itself with the command registry in core.execution.command_registry.
"""

from core.execution.command_registry import (
    REGISTERED_COMMANDS,
    COMMAND_SCHEMAS,
    register_command,
    init,
    cleanup,
    get_command_registry
)


def get_available_commands():
    """Get the registered CLI command names."""
    return get_command_registry().list_commands()


def get_commands_by_category():
    """Get commands organized by category."""
    return get_command_registry().list_commands_by_category()


__all__ = [
    'REGISTERED_COMMANDS',
    'COMMAND_SCHEMAS',
    'register_command',
    'init',
    'cleanup',
    'get_command_registry',
    'get_available_commands',
    'get_commands_by_category'
]
