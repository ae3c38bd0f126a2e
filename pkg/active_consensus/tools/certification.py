"""Stability certificate tool."""

import asyncio
import logging
from typing import List, Optional

from mcp.server import FastMCP
from mcp.types import TextContent

from active_consensus import report
from active_consensus.config import parse_config
from active_consensus.errors import ConsensusError
from active_consensus.shared.responses import error_content, json_content

logger = logging.getLogger(__name__)

CERTIFICATION_TOOLS = {"certify": "certification_certify"}


async def certification_certify(
    config_json: str, mode: Optional[str] = None, allow_unstable: bool = False
) -> List[TextContent]:
    """Fit and check an exponential stability certificate for a scenario document.

    The reply carries ``kappa``, the rate, the held-out worst ratio and whether
    the resulting error bound dominates the simulated error.
    """
    if mode not in (None, "ct", "dt"):
        return error_content(f"mode must be 'ct' or 'dt', got '{mode}'")
    try:
        config = parse_config(config_json, "config_json")
        result = await asyncio.to_thread(report.certify, config, mode, allow_unstable)
        return json_content(result.summary)
    except ConsensusError as e:
        logger.debug("certification failed: %s", e)
        return error_content(str(e))


def configure_certification_tools(server: FastMCP) -> None:
    server.add_tool(certification_certify, name=CERTIFICATION_TOOLS["certify"])
