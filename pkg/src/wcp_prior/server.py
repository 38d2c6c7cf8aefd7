"""MCP server entry point -- FastMCP app exposing the prior catalog as read-only tools."""

from __future__ import annotations

import json
from typing import Any

from mcp.server.fastmcp import FastMCP

from .io import dumps

mcp = FastMCP("wcp-prior")

# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _parse_json(value: str | dict | list | None, name: str) -> Any:
    """Parse a JSON string into a Python object, or pass through if already parsed."""
    if value is None:
        return None
    if isinstance(value, (dict, list, int, float)):
        return value
    try:
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise ValueError(f"Invalid JSON for parameter '{name}': {exc}") from exc


def _hyperparameters(value: str | dict | None) -> dict:
    parsed = _parse_json(value, "hyperparameters")
    if parsed is None:
        return {}
    if not isinstance(parsed, dict):
        raise ValueError(f"'hyperparameters' must be a JSON object, got {type(parsed).__name__}")
    return parsed


def _response(payload: Any) -> str:
    """Indented JSON; non-finite floats become strings."""
    return dumps(payload).rstrip("\n")


def _error_response(exc: Exception) -> str:
    """Format an exception into the JSON error envelope."""
    return json.dumps({"error": True, "type": type(exc).__name__, "message": str(exc)}, indent=2)


# ---------------------------------------------------------------------------
# Register tool modules -- each module calls @mcp.tool() at import time
# ---------------------------------------------------------------------------

from .tools import register_all_tools  # noqa: E402

register_all_tools()


def main() -> None:
    """Entry point for the console script."""
    mcp.run()
