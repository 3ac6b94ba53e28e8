"""
Helpers for reading run configurations, suite files and numeric CLI values.
"""
import json
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from app.errors import ConfigError


def load_json_document(text: str, source: str = "<input>") -> Any:
    """
    Parse a JSON document.

    Strategy:
    1. Direct JSON parsing
    2. A fenced ```json block (documents pasted from notes or issues)

    Args:
        text: Raw document text
        source: Name used in error messages (usually the file path)

    Returns:
        The parsed document

    Raises:
        ConfigError: With line and column of the first syntax error
    """
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        error = exc

    blocks = re.findall(r"```(?:json)?\s*(.*?)\s*```", text, re.DOTALL)
    for block in blocks:
        try:
            return json.loads(block)
        except json.JSONDecodeError:
            continue

    raise ConfigError(f"{source}: invalid JSON at line {error.lineno}, column {error.colno}: {error.msg}")


def load_json_file(path: Union[str, Path]) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read {path}: {exc}")
    return load_json_document(text, str(path))


def ensure_keys(data: Dict[str, Any], required_keys: List[str], source: str = "<input>") -> Dict[str, Any]:
    """
    Ensure a mapping contains all required keys.

    Raises:
        ConfigError: Naming the missing keys
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a JSON object, got {type(data).__name__}")
    missing = [key for key in required_keys if key not in data]
    if missing:
        raise ConfigError(f"{source}: missing required keys {missing}")
    return data


def parse_float_list(text: Optional[str], name: str = "value") -> Optional[List[float]]:
    """'0.2,0.1,0.05' -> [0.2, 0.1, 0.05]; None passes through."""
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"Invalid {name} {text!r}: expected comma-separated numbers")
