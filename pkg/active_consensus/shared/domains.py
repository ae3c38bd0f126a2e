"""Tool domains exposed by the MCP server."""

import logging
from enum import Enum
from typing import List, Optional, Set, Union

logger = logging.getLogger(__name__)


class Domain(str, Enum):
    """Groups of tools that can be switched on independently."""

    ANALYSIS = "analysis"
    SIMULATION = "simulation"
    CONTAINMENT = "containment"
    CERTIFICATION = "certification"


ALL_DOMAINS = "all"


class DomainsManager:
    """Parses and validates the domains requested on the command line."""

    def __init__(self, domains_input: Optional[Union[str, List[str]]] = None):
        """Initialize the domains manager.

        Args:
            domains_input: "all", a comma-separated string, a list of domain
                names, or None (defaults to "all")
        """
        self.enabled_domains: Set[str] = set()
        self._parse_domains(domains_input)

    def _parse_domains(self, domains_input: Optional[Union[str, List[str]]]) -> None:
        if not domains_input:
            self._enable_all_domains()
            return
        if isinstance(domains_input, str):
            domains_input = domains_input.split(",")
        requested = [d.strip().lower() for d in domains_input if d.strip()]
        if not requested or ALL_DOMAINS in requested:
            self._enable_all_domains()
            return
        self._validate_and_add_domains(requested)

    def _validate_and_add_domains(self, domains: List[str]) -> None:
        available = self.get_available_domains()
        for domain in domains:
            if domain in available:
                self.enabled_domains.add(domain)
            else:
                logger.error(
                    "Specified invalid domain '%s'. Please specify exactly as available domains: %s",
                    domain,
                    ", ".join(available),
                )
        if len(self.enabled_domains) == 0:
            self._enable_all_domains()

    def _enable_all_domains(self) -> None:
        self.enabled_domains.update(d.value for d in Domain)

    def is_domain_enabled(self, domain: str) -> bool:
        return domain in self.enabled_domains

    def get_enabled_domains(self) -> Set[str]:
        """Get a copy of the enabled domain names."""
        return self.enabled_domains.copy()

    @staticmethod
    def get_available_domains() -> List[str]:
        return [d.value for d in Domain]
