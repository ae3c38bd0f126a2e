"""Leader containment tool."""

import asyncio
from typing import List

from mcp.server import FastMCP
from mcp.types import TextContent

from active_consensus import report
from active_consensus.config import parse_config
from active_consensus.errors import ConsensusError
from active_consensus.shared.responses import error_content, json_content

CONTAINMENT_TOOLS = {"run": "containment_run"}


async def containment_run(config_json: str, allow_unstable: bool = False) -> List[TextContent]:
    """Run a containment scenario and report centroid error and hull membership."""
    try:
        config = parse_config(config_json, "config_json")
        result = await asyncio.to_thread(report.containment, config, allow_unstable)
        return json_content(report.containment_summary(config, result))
    except ConsensusError as e:
        return error_content(str(e))


def configure_containment_tools(server: FastMCP) -> None:
    server.add_tool(containment_run, name=CONTAINMENT_TOOLS["run"])
