"""Tool response helpers."""

import json
from typing import Any, List

from mcp.types import TextContent

from active_consensus.report import to_jsonable


def json_content(data: Any) -> List[TextContent]:
    return [TextContent(type="text", text=json.dumps(to_jsonable(data), indent=2))]


def error_content(message: str) -> List[TextContent]:
    return [TextContent(type="text", text=f"Error: {message}")]
