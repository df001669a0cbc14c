import json
import logging
import os
import re
import sys
from fractions import Fraction
from typing import Any, Dict, Mapping, Optional, Tuple

import json_repair

from config import settings
from core.rational_matrix import RationalMatrix, RationalMatrixError, parse_rational, require_special_linear

logger = logging.getLogger(__name__)

REP_KEYS = ("a_x", "b_x", "c_x", "a_y", "b_y", "c_y")


class FileFormatError(Exception):
    """Custom exception for malformed group, rep and certificate files."""
    pass


def clean_and_parse_json(raw_text: str, context: Optional[str] = None) -> Any:
    """
    Parses hand-written JSON input, tolerating markdown fences, comments and
    trailing commas (json_repair does the heavy lifting).

    Args:
        raw_text: The file contents.
        context: Optional label for logging, e.g. the file path.

    Returns:
        The parsed JSON data, or None if nothing usable was found.
    """
    if not raw_text or not raw_text.strip():
        logger.warning(f"JSON parsing: Empty input. Context: {context or 'N/A'}")
        return None

    cleaned = raw_text.strip()
    match = re.match(r"^\s*```(?:[a-zA-Z0-9]+)?\s*(.*?)\s*```\s*$", cleaned, re.DOTALL | re.IGNORECASE)
    if match:
        cleaned = match.group(1).strip()
        logger.debug(f"JSON parsing: Removed markdown fences. Context: {context or 'N/A'}")

    if not cleaned:
        logger.warning(f"JSON parsing: Input became empty after stripping fences. Context: {context or 'N/A'}")
        return None

    try:
        return json.loads(cleaned)
    except json.JSONDecodeError:
        pass

    try:
        parsed = json_repair.loads(cleaned)
        logger.debug(f"JSON parsing: Parsed with json_repair. Context: {context or 'N/A'}")
    except Exception as e:
        logger.warning(f"JSON parsing: json_repair failed. Error: {e}. Context: {context or 'N/A'}")
        return None
    if parsed in ("", None) or not isinstance(parsed, (dict, list)):
        return None
    return parsed


def load_json_file(path: str, context: Optional[str] = None) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise FileFormatError(f"File not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        raw = f.read()
    data = clean_and_parse_json(raw, context=context or path)
    if not isinstance(data, dict):
        raise FileFormatError(f"{path}: expected a JSON object")
    return data


def parse_group(data: Mapping[str, Any], require_sl: bool = True) -> Tuple[int, Dict[str, RationalMatrix]]:
    """
    Reads {"dim": d, "generators": {name: [[entry, ...], ...]}} with exact string entries.

    Generators must have determinant 1 unless require_sl is False.
    """
    if "generators" not in data or not isinstance(data["generators"], dict) or not data["generators"]:
        raise FileFormatError("Group file needs a nonempty 'generators' object")
    generators: Dict[str, RationalMatrix] = {}
    for name, rows in data["generators"].items():
        try:
            g = RationalMatrix(rows)
            if require_sl:
                require_special_linear(g, name=f"generator '{name}'")
        except (RationalMatrixError, TypeError) as e:
            raise FileFormatError(f"Generator '{name}': {e}") from e
        generators[str(name)] = g
    dims = {g.dim for g in generators.values()}
    try:
        dim = int(data.get("dim", next(iter(dims))))
    except (TypeError, ValueError) as e:
        raise FileFormatError(f"Invalid 'dim' value {data.get('dim')!r}") from e
    if dims != {dim}:
        raise FileFormatError(f"Declared dim {dim} does not match generator dimensions {sorted(dims)}")
    return dim, generators


def group_to_json(generators: Mapping[str, RationalMatrix]) -> Dict[str, Any]:
    dim = next(iter(generators.values())).dim
    return {"dim": dim, "generators": {name: g.to_strings() for name, g in generators.items()}}


def load_group_file(path: str) -> Tuple[int, Dict[str, RationalMatrix]]:
    data = load_json_file(path, context="group file")
    return parse_group(data)


def parse_rep(data: Mapping[str, Any]) -> Dict[str, Fraction]:
    missing = [k for k in REP_KEYS if k not in data]
    if missing:
        raise FileFormatError(f"Rep file is missing keys {missing}")
    try:
        return {k: parse_rational(data[k]) for k in REP_KEYS}
    except RationalMatrixError as e:
        raise FileFormatError(f"Rep file: {e}") from e


def load_rep_file(path: str) -> Dict[str, Fraction]:
    return parse_rep(load_json_file(path, context="rep file"))


def format_float(x: float) -> str:
    """17 significant digits; round-trips every finite double."""
    return settings.FLOAT_FORMAT.format(float(x))


def write_json(data: Any, path: Optional[str] = None) -> None:
    """Writes deterministic JSON (sorted keys) to path, or to stdout when path is None or '-'."""
    text = json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
        return
    out_dir = os.path.dirname(path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
