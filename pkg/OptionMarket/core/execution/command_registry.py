"""
Command Registry for OptionMarket.

Command packages live under commands/<category>/<name>/__init__.py and
register themselves on import through register_command(). The registry
discovers them, keeps their argparse schemas, and builds the CLI parser the
entry script runs.

Schema layout:
    {
        "type": "command",
        "function": {
            "name": "dispatch",
            "description": "...",
            "arguments": [
                {"flags": ["--omega"], "type": "float", "help": "..."},
            ],
        },
    }
"""

import sys
import logging
import argparse
import importlib
import pathlib
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

# Global registries
REGISTERED_COMMANDS: Dict[str, Callable] = {}
COMMAND_SCHEMAS: List[Dict[str, Any]] = []

COMMANDS_DIR = pathlib.Path(__file__).resolve().parents[2] / 'commands'

ARGUMENT_TYPES = {
    "str": str,
    "int": int,
    "float": float,
}


@dataclass
class Command:
    """A CLI subcommand discovered in the commands package."""
    name: str
    category: str
    module: str
    schema: Dict[str, Any] = field(default_factory=dict)
    function: Optional[Callable] = None
    loaded: bool = False


class CommandRegistry:
    """Discovers command packages and maps them to their registered functions."""

    def __init__(self, commands_dir: pathlib.Path = COMMANDS_DIR):
        self.logger = logging.getLogger(__name__)
        self.commands_dir = commands_dir
        self.commands: Dict[str, Command] = {}

    def initialize(self) -> None:
        """Import every command package and attach its registration."""
        self.logger.debug("🚀 Initializing Command Registry...")
        self._discover_local_commands()
        self._attach_schemas()
        self.logger.debug(f"✅ Discovered {len(self.commands)} commands")

    def _discover_local_commands(self) -> None:
        if not self.commands_dir.exists():
            self.logger.warning(f"Commands directory not found: {self.commands_dir}")
            return
        # The app directory must be importable for 'commands.<category>.<name>'
        app_root = str(self.commands_dir.parent)
        if app_root not in sys.path:
            sys.path.insert(0, app_root)
        for category_dir in sorted(self.commands_dir.iterdir()):
            if not category_dir.is_dir() or category_dir.name.startswith('__'):
                continue
            for command_dir in sorted(category_dir.iterdir()):
                if not command_dir.is_dir() or command_dir.name.startswith('__'):
                    continue
                if not (command_dir / '__init__.py').exists():
                    continue
                module_name = f"commands.{category_dir.name}.{command_dir.name}"
                try:
                    importlib.import_module(module_name)
                except ImportError as e:
                    self.logger.error(f"Failed to import command {module_name}: {e}")
                    continue
                self.commands[command_dir.name] = Command(
                    name=command_dir.name,
                    category=category_dir.name,
                    module=module_name,
                )
                self.logger.debug(f"Discovered command: {command_dir.name} in {category_dir.name}")

    def _attach_schemas(self) -> None:
        by_module = {}
        for schema in COMMAND_SCHEMAS:
            name = schema["function"]["name"]
            func = REGISTERED_COMMANDS.get(name)
            if func is not None:
                by_module[func.__module__] = (schema, func)
        for command in self.commands.values():
            entry = by_module.get(command.module)
            if entry is None:
                self.logger.warning(f"Command package {command.module} registered nothing")
                continue
            command.schema, command.function = entry
            command.loaded = True

    def get_command(self, name: str) -> Optional[Command]:
        """Look up a command by its registered (CLI) name."""
        for command in self.commands.values():
            if command.loaded and command.schema["function"]["name"] == name:
                return command
        return None

    def list_commands(self) -> List[str]:
        """Registered CLI names, sorted."""
        return sorted(c.schema["function"]["name"] for c in self.commands.values() if c.loaded)

    def list_commands_by_category(self) -> Dict[str, List[str]]:
        categories: Dict[str, List[str]] = {}
        for command in self.commands.values():
            if command.loaded:
                categories.setdefault(command.category, []).append(command.schema["function"]["name"])
        return {k: sorted(v) for k, v in categories.items()}

    def build_parser(self, prog: str = "OptionMarket") -> argparse.ArgumentParser:
        """
        One argparse subparser per registered schema.

        Every subcommand takes the experiment file as its first positional
        argument; the chosen function is stored in args.handler.
        """
        parser = argparse.ArgumentParser(
            prog=prog,
            description="Two-settlement electricity market with cash-settled call options",
        )
        parser.add_argument('--output-dir', default=None,
                            help='Base directory for run artifacts (overrides run.output_dir)')
        parser.add_argument('--debug', action='store_true', help='Enable debug logging')
        subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
        subparsers.required = True
        for schema in sorted(COMMAND_SCHEMAS, key=lambda s: s["function"]["name"]):
            spec = schema["function"]
            sub = subparsers.add_parser(spec["name"], help=spec.get("description", ""),
                                        description=spec.get("description", ""))
            sub.add_argument('config', help='Experiment file (JSON, or YAML for .yaml/.yml)')
            for argument in spec.get("arguments", []):
                kwargs = {k: v for k, v in argument.items() if k not in ("flags", "type")}
                if "type" in argument:
                    kwargs["type"] = ARGUMENT_TYPES[argument["type"]]
                sub.add_argument(*argument["flags"], **kwargs)
            sub.set_defaults(handler=REGISTERED_COMMANDS[spec["name"]])
        return parser

    def print_commands(self) -> None:
        """Print the registered commands grouped by category."""
        print("\n" + "=" * 80)
        print("🧰 OptionMarket commands")
        print("=" * 80)
        icons = {
            'market': '⚡',
            'options': '📜',
            'risk': '🛡️',
            'analytics': '📊',
        }
        for category, names in sorted(self.list_commands_by_category().items()):
            print(f"\n{icons.get(category, '🔧')} {category.replace('_', ' ').title()}")
            print("-" * 50)
            for name in names:
                description = self.get_command(name).schema["function"].get("description", "")
                print(f"  {name:<15} {description}")
        print("\n" + "=" * 80 + "\n")

    def cleanup(self) -> None:
        self.commands.clear()


# Global instance
_command_registry: Optional[CommandRegistry] = None


def get_command_registry() -> CommandRegistry:
    """Get or create the global command registry."""
    global _command_registry
    if _command_registry is None:
        _command_registry = CommandRegistry()
    return _command_registry


def register_command(name: str, func: Callable, schema: Dict[str, Any]) -> None:
    """
    Register a CLI command.
    Called by command packages when they are imported.
    """
    REGISTERED_COMMANDS[name] = func

    for i, existing_schema in enumerate(COMMAND_SCHEMAS):
        if existing_schema.get("function", {}).get("name") == name:
            COMMAND_SCHEMAS[i] = schema
            break
    else:
        COMMAND_SCHEMAS.append(schema)

    logging.getLogger(__name__).debug(f"Registered command: {name}")


def init() -> CommandRegistry:
    """Initialize the command registry."""
    registry = get_command_registry()
    if not registry.commands:
        registry.initialize()
    return registry


def cleanup() -> None:
    """Drop the global registry."""
    global _command_registry
    if _command_registry:
        _command_registry.cleanup()
        _command_registry = None
