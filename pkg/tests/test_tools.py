"""Tests for the MCP tools."""

import json

import pytest
from mcp.server import FastMCP

from active_consensus.config import parse_config
from active_consensus.main import build_server
from active_consensus.tools import configure_all_tools
from active_consensus.tools.analysis import (
    ANALYSIS_TOOLS,
    analysis_max_stable_step,
    analysis_stability,
)
from active_consensus.tools.certification import CERTIFICATION_TOOLS, certification_certify
from active_consensus.tools.containment import CONTAINMENT_TOOLS, containment_run
from active_consensus.tools.simulation import (
    SIMULATION_TOOLS,
    simulation_demo_config,
    simulation_run,
)

CONFIG = json.dumps(
    {
        "schema_version": 1,
        "name": "pair",
        "horizon": 30.0,
        "topology": {"kind": "path", "n": 2},
        "schedule": {"epochs": [{"t": 0.0, "weights": [1.0, 1.0]}]},
        "signals": [
            {"kind": "constant", "params": {"value": 0.0}},
            {"kind": "constant", "params": {"value": 2.0}},
        ],
        "rates": {"step": 0.01, "delta_c": 0.1, "delta_s": 0.1},
        "initial": {"x": [0.0, 2.0]},
    }
)


def _payload(content):
    assert len(content) == 1
    assert content[0].type == "text"
    return json.loads(content[0].text)


def _error(content):
    assert len(content) == 1
    assert content[0].text.startswith("Error: ")
    return content[0].text


async def test_analysis_stability():
    report = _payload(await analysis_stability(CONFIG))
    assert report["name"] == "pair"
    assert report["all_hurwitz"] is True
    assert report["all_schur"] is True


async def test_analysis_max_stable_step():
    result = _payload(await analysis_max_stable_step(CONFIG))
    assert set(result) == {"name", "max_stable_step", "binding_subsystem"}
    assert result["max_stable_step"] > 0.1


async def test_invalid_document_is_reported_not_raised():
    message = _error(await analysis_stability('{"schema_version": 1,'))
    assert "config_json:" in message


async def test_simulation_run_both_modes():
    ct = _payload(await simulation_run(CONFIG))
    assert ct["mode"] == "ct"
    assert ct["final_error"] < 1e-2
    dt = _payload(await simulation_run(CONFIG, mode="dt"))
    assert dt["mode"] == "dt"
    assert dt["d_bar"] > dt["delta_c"]


async def test_simulation_run_rejects_unknown_mode():
    assert "mode" in _error(await simulation_run(CONFIG, mode="hybrid"))


@pytest.mark.parametrize("name", ["fig2", "fig4", "ring", "leaders", "random"])
async def test_demo_config_parses(name):
    content = await simulation_demo_config(name, seed=5)
    config = parse_config(content[0].text)
    assert config.schema_version == 1


async def test_demo_config_unknown_name():
    assert "fig9" in _error(await simulation_demo_config("fig9"))


@pytest.mark.parametrize(("alias", "name"), [("ring", "fig2"), ("leaders", "fig4")])
async def test_demo_config_aliases(alias, name):
    by_alias = (await simulation_demo_config(alias))[0].text
    assert by_alias == (await simulation_demo_config(name))[0].text
    assert parse_config(by_alias).name == name


async def test_containment_needs_its_section():
    assert "containment" in _error(await containment_run(CONFIG))


async def test_certify_needs_dwell():
    assert "dwell" in _error(await certification_certify(CONFIG))
    assert "mode" in _error(await certification_certify(CONFIG, mode="both"))


async def _tool_names(server):
    return {tool.name for tool in await server.list_tools()}


async def test_configure_selected_domains():
    server = FastMCP("test")
    configure_all_tools(server, {"analysis", "containment"})
    names = await _tool_names(server)
    assert names == set(ANALYSIS_TOOLS.values()) | set(CONTAINMENT_TOOLS.values())


async def test_build_server_registers_every_domain():
    names = await _tool_names(build_server(["all"]))
    expected = set()
    for tools in (ANALYSIS_TOOLS, SIMULATION_TOOLS, CONTAINMENT_TOOLS, CERTIFICATION_TOOLS):
        expected |= set(tools.values())
    assert names == expected
