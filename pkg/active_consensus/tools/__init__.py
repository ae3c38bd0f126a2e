"""Tools configuration for the active consensus MCP server."""

from typing import Callable, Set

from mcp.server import FastMCP

from active_consensus.shared.domains import Domain


def configure_all_tools(server: FastMCP, enabled_domains: Set[str]) -> None:
    """Register the tools of every enabled domain on ``server``.

    Args:
        server: MCP server instance
        enabled_domains: Set of enabled domain names
    """

    def configure_if_domain_enabled(domain: str, configure_fn: Callable[[FastMCP], None]) -> None:
        if domain in enabled_domains:
            configure_fn(server)

    from active_consensus.tools.analysis import configure_analysis_tools
    from active_consensus.tools.certification import configure_certification_tools
    from active_consensus.tools.containment import configure_containment_tools
    from active_consensus.tools.simulation import configure_simulation_tools

    configure_if_domain_enabled(Domain.ANALYSIS.value, configure_analysis_tools)
    configure_if_domain_enabled(Domain.SIMULATION.value, configure_simulation_tools)
    configure_if_domain_enabled(Domain.CONTAINMENT.value, configure_containment_tools)
    configure_if_domain_enabled(Domain.CERTIFICATION.value, configure_certification_tools)
