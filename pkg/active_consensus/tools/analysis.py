"""Stability analysis tools."""

import asyncio
import logging
from typing import List

from mcp.server import FastMCP
from mcp.types import TextContent

from active_consensus import report
from active_consensus.config import parse_config
from active_consensus.errors import ConsensusError
from active_consensus.shared.responses import error_content, json_content

logger = logging.getLogger(__name__)

ANALYSIS_TOOLS = {
    "stability": "analysis_stability",
    "max_stable_step": "analysis_max_stable_step",
}


async def analysis_stability(config_json: str) -> List[TextContent]:
    """Eigenvalues, Hurwitz and Schur checks for every weight pattern of a scenario document."""
    try:
        config = parse_config(config_json, "config_json")
        result = await asyncio.to_thread(report.analyze, config)
        return json_content(result)
    except ConsensusError as e:
        logger.debug("stability analysis failed: %s", e)
        return error_content(str(e))


async def analysis_max_stable_step(config_json: str) -> List[TextContent]:
    """Largest communication period for which the discrete protocol stays stable."""
    try:
        config = parse_config(config_json, "config_json")
        result = await asyncio.to_thread(report.analyze, config)
        return json_content(
            {
                "name": result["name"],
                "max_stable_step": result["max_stable_step"],
                "binding_subsystem": result["binding_subsystem"],
            }
        )
    except ConsensusError as e:
        return error_content(str(e))


def configure_analysis_tools(server: FastMCP) -> None:
    server.add_tool(analysis_stability, name=ANALYSIS_TOOLS["stability"])
    server.add_tool(analysis_max_stable_step, name=ANALYSIS_TOOLS["max_stable_step"])
