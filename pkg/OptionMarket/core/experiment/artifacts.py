"""
CSV artifact writer.

Every file starts with '# key: value' comment lines (tool version, config
hash, run hash, seed, scenario count, CLI overrides, RNG identifier) followed
by an RFC-4180 table written by pandas with 12 significant digits. Identical
inputs give byte-identical files.
"""

import os
import json
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

from core.scenario.scenario import rng_identifier
from core.utils.config import CSV_FLOAT_FORMAT
from core.utils.security import get_secure_path
from core.utils.version import TOOL_VERSION

logger = logging.getLogger(__name__)


def version_folder(version: str = TOOL_VERSION) -> str:
    """'v1.2.0' -> 'v1_2_0'."""
    return 'v' + '_'.join(version.lstrip('v').split('.'))


def canonical_overrides(overrides: Optional[Dict[str, Any]]) -> str:
    """Compact sorted-key JSON of the overrides that were actually given."""
    given = {k: v for k, v in (overrides or {}).items() if v is not None}
    return json.dumps(given, sort_keys=True, separators=(",", ":"))


def run_hash(config_hash: str, overrides: Optional[Dict[str, Any]] = None) -> str:
    """
    Hash naming a run folder.

    Without overrides this is the config hash itself; otherwise the SHA-256
    of the config hash and the canonical overrides, so runs that differ only
    in CLI flags land in different folders.
    """
    rendered = canonical_overrides(overrides)
    if rendered == "{}":
        return config_hash
    return hashlib.sha256(f"{config_hash}:{rendered}".encode("utf-8")).hexdigest()


def run_directory(base_dir: str, command: str, digest: str) -> str:
    """Deterministic run folder: <base>/<version>/<command>_<hash prefix>."""
    return os.path.join(base_dir, version_folder(), f"{command}_{digest[:12]}")


@dataclass
class ArtifactWriter:
    output_dir: str
    config_hash: str
    seed: Optional[int] = None
    scenarios: Optional[int] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        os.makedirs(self.output_dir, exist_ok=True)
        self.written: List[str] = []

    def header(self) -> Dict[str, str]:
        return {
            "tool_version": TOOL_VERSION,
            "config_hash": self.config_hash,
            "run_hash": run_hash(self.config_hash, self.overrides),
            "seed": "none" if self.seed is None else str(self.seed),
            "scenarios": "none" if self.scenarios is None else str(self.scenarios),
            "overrides": canonical_overrides(self.overrides),
            "rng": rng_identifier(),
        }

    def write(self, name: str, frame: pd.DataFrame) -> str:
        """Write one table under the run directory and return its path."""
        path = get_secure_path(name, base_dir=self.output_dir)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for key, value in self.header().items():
                f.write(f"# {key}: {value}\n")
            frame.to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        self.written.append(path)
        logger.debug("Wrote %s (%d rows)", path, len(frame))
        return path


def read_artifact(path: str) -> pd.DataFrame:
    """Load a written artifact, skipping its comment header."""
    return pd.read_csv(path, comment="#")


def read_header(path: str) -> Dict[str, str]:
    header = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            header[key] = value
    return header
