"""Simulation tools: continuous and discrete-time runs and the built-in scenarios."""

import asyncio
import logging
from typing import List

from mcp.server import FastMCP
from mcp.types import TextContent

from active_consensus import report
from active_consensus.config import dump_config, parse_config
from active_consensus.errors import ConsensusError, InvalidInputError
from active_consensus.scenarios import demo_config
from active_consensus.shared.responses import error_content, json_content

logger = logging.getLogger(__name__)

SIMULATION_TOOLS = {
    "run": "simulation_run",
    "demo_config": "simulation_demo_config",
}


async def simulation_run(config_json: str, mode: str = "ct", allow_unstable: bool = False) -> List[TextContent]:
    """Simulate a scenario document and return its error summary.

    ``mode`` is ``ct`` for the continuous-time protocol or ``dt`` for the
    dual-rate discrete one.
    """
    if mode not in ("ct", "dt"):
        return error_content(f"mode must be 'ct' or 'dt', got '{mode}'")
    try:
        config = parse_config(config_json, "config_json")
        if mode == "ct":
            result = await asyncio.to_thread(report.simulate_ct, config)
        else:
            result = await asyncio.to_thread(report.simulate_dt, config, allow_unstable)
        return json_content(result.summary)
    except ConsensusError as e:
        logger.debug("simulation failed: %s", e)
        return error_content(str(e))


async def simulation_demo_config(name: str, seed: int = 0) -> List[TextContent]:
    """Scenario document of a built-in scenario: ``fig2``, ``fig4`` (aliases ``ring``, ``leaders``) or ``random``."""
    try:
        config = demo_config(name, seed)
    except InvalidInputError as e:
        return error_content(str(e))
    return [TextContent(type="text", text=dump_config(config))]


def configure_simulation_tools(server: FastMCP) -> None:
    server.add_tool(simulation_run, name=SIMULATION_TOOLS["run"])
    server.add_tool(simulation_demo_config, name=SIMULATION_TOOLS["demo_config"])
