"""Scenario file loading, export and hashing.

A scenario is addressed either by a path to a JSON file or by the name of a
bundled scenario (``fig4-family``, ``quadrant-one``, ``no-attack``).
"""

import hashlib
import json
import logging
from importlib import resources
from pathlib import Path
from typing import List, Union

from pydantic import ValidationError as PydanticValidationError

from .error_handling import ScenarioError
from .schemas import Scenario

logger = logging.getLogger(__name__)

BUNDLED_PACKAGE = "cloudcontrol"
BUNDLED_DIR = "scenarios"


def _bundled_dir():
    return resources.files(BUNDLED_PACKAGE).joinpath(BUNDLED_DIR)


def list_bundled_scenarios() -> List[str]:
    """Names of the scenarios shipped with the package, sorted."""
    return sorted(
        entry.name[: -len(".json")]
        for entry in _bundled_dir().iterdir()
        if entry.name.endswith(".json")
    )


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Validate scenario JSON text.

    Raises:
        ScenarioError: If the text is not valid JSON or violates the schema
    """
    try:
        return Scenario.model_validate_json(text)
    except PydanticValidationError as e:
        problems = [
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        ]
        raise ScenarioError(
            f"Invalid scenario {source}: {len(problems)} problem(s)",
            details={"source": source, "problems": problems},
        ) from e


def load_scenario(source: Union[str, Path]) -> Scenario:
    """Load a scenario from a file path or a bundled scenario name.

    Raises:
        ScenarioError: If the scenario cannot be found or fails validation
    """
    path = Path(source)
    if path.is_file():
        logger.debug(f"Loading scenario from {path}")
        return parse_scenario(path.read_text(encoding="utf-8"), source=str(path))

    name = str(source)
    bundled = _bundled_dir().joinpath(f"{name}.json")
    if bundled.is_file():
        logger.debug(f"Loading bundled scenario {name}")
        return parse_scenario(bundled.read_text(encoding="utf-8"), source=name)

    raise ScenarioError(
        f"Scenario not found: {name}",
        details={"bundled": list_bundled_scenarios()},
    )


def dump_scenario(scenario: Scenario) -> str:
    """Export a scenario as JSON with numbers written as decimal strings."""
    return scenario.model_dump_json(indent=2, exclude_none=True) + "\n"


def scenario_hash(scenario: Scenario) -> str:
    """sha256 of the canonical (sorted, compact) JSON form."""
    canonical = json.dumps(
        scenario.model_dump(mode="json", exclude_none=True),
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
