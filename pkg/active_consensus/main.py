#!/usr/bin/env python3
"""
Active consensus - command line interface

Exit status is 0 when every requested check passes, 1 when a check fails or
a run breaks down numerically, and 2 for invalid configuration or input.
"""

import asyncio
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import click
from pydantic import ValidationError

from active_consensus import __version__, report
from active_consensus.config import ScenarioConfig, dump_config, load_config
from active_consensus.errors import ConsensusError, InvalidInputError, UnstableStepError
from active_consensus.scenarios import ALIASES, DEMO_NAMES, demo_config
from active_consensus.settings import LOG_LEVELS, Settings, configure_logging
from active_consensus.shared.domains import DomainsManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2

Runner = Callable[[ScenarioConfig, Path], bool]


def exit_code_for(exc: BaseException) -> int:
    """Map a package error to the process exit status."""
    if isinstance(exc, (InvalidInputError, UnstableStepError)):
        return EXIT_INVALID
    return EXIT_FAILED


def _run_one(runner: Runner, config: ScenarioConfig, directory: Path) -> int:
    try:
        passed = runner(config, directory)
    except ConsensusError as exc:
        click.echo(f"{config.name}: error: {exc}", err=True)
        return exit_code_for(exc)
    click.echo(f"{config.name}: {'PASS' if passed else 'FAIL'} ({directory})")
    return EXIT_OK if passed else EXIT_FAILED


def run_scenarios(configs: Sequence[ScenarioConfig], out: Path, jobs: int, runner: Runner) -> int:
    """Run ``runner`` on each scenario, ``jobs`` at a time; returns the worst exit status."""
    targets: List[Tuple[ScenarioConfig, Path]] = []
    seen = set()
    for index, config in enumerate(configs):
        # duplicate names get the document's position as a suffix
        name = config.name if config.name not in seen else f"{config.name}-{index}"
        seen.add(config.name)
        targets.append((config, out / name))
    if jobs <= 1 or len(targets) == 1:
        codes = [_run_one(runner, config, directory) for config, directory in targets]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(lambda item: _run_one(runner, *item), targets))
    return max(codes, default=EXIT_OK)


def _load(paths: Sequence[str]) -> List[ScenarioConfig]:
    try:
        return [load_config(path) for path in paths]
    except InvalidInputError as exc:
        click.echo(f"Error: {exc}", err=True)
        sys.exit(EXIT_INVALID)


def scenario_options(fn: Callable) -> Callable:
    """Options shared by the commands that run scenario documents."""
    fn = click.option(
        "--jobs", "-j", type=click.IntRange(min=1), default=None,
        help="Scenarios to run in parallel (default: ACONS_JOBS or 1)",
    )(fn)
    fn = click.option(
        "--out", "-o", type=click.Path(file_okay=False, path_type=Path), default=None,
        help="Output directory (default: ACONS_OUT or ./out)",
    )(fn)
    fn = click.option(
        "--config", "-c", "configs", multiple=True, required=True, type=click.Path(exists=True, dir_okay=False),
        help="Scenario JSON document; repeat for several scenarios",
    )(fn)
    return fn


def unstable_option(fn: Callable) -> Callable:
    return click.option(
        "--allow-unstable", is_flag=True, default=False,
        help="Run even when the communication period is not below the maximum stable step",
    )(fn)


def _settings(ctx: click.Context) -> Settings:
    return ctx.obj


def _dispatch(ctx: click.Context, configs: Sequence[str], out: Optional[Path], jobs: Optional[int], runner: Runner) -> None:
    settings = _settings(ctx)
    code = run_scenarios(_load(configs), out or settings.out, jobs or settings.jobs, runner)
    ctx.exit(code)


@click.group()
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Log verbosity (default: ACONS_LOG or WARNING)")
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str]) -> None:
    """Active weighted average consensus: analysis, simulation and certificates."""
    try:
        settings = Settings()
    except ValidationError as exc:
        click.echo(f"Error: invalid ACONS_* environment: {exc.errors()[0]['msg']}", err=True)
        ctx.exit(EXIT_INVALID)
    configure_logging(log_level or settings.log)
    ctx.obj = settings


def analyze_runner(config: ScenarioConfig, directory: Path) -> bool:
    result = report.analyze(config)
    report.write_json(directory / "analysis.json", result)
    step = result["max_stable_step"]
    shown = "n/a" if step is None else f"{step:.6g} s"
    click.echo(f"{config.name}: max stable step {shown}, all Hurwitz: {result['all_hurwitz']}")
    return result["passed"]


def _write_simulation(result: report.SimulationResult, directory: Path, name: str) -> None:
    report.write_trajectory_csv(directory / "trajectory.csv", result.trajectory)
    report.write_error_csv(directory / "errors.csv", result.trajectory, result.bound)
    report.write_json(directory / name, result.summary)


def ct_runner(config: ScenarioConfig, directory: Path) -> bool:
    result = report.simulate_ct(config)
    _write_simulation(result, directory, "summary.json")
    return result.summary["passed"]


def dt_runner(allow_unstable: bool) -> Runner:
    def run(config: ScenarioConfig, directory: Path) -> bool:
        result = report.simulate_dt(config, allow_unstable)
        _write_simulation(result, directory, "summary.json")
        return result.summary["passed"]

    return run


def certify_runner(mode: Optional[str], allow_unstable: bool) -> Runner:
    def run(config: ScenarioConfig, directory: Path) -> bool:
        result = report.certify(config, mode, allow_unstable)
        _write_simulation(result, directory, "certificate.json")
        certificate = result.summary["certificate"]
        click.echo(
            f"{config.name}: kappa={certificate['kappa']:.6g} rate={certificate['rate']:.6g} "
            f"held-out worst ratio={result.summary['held_out']['worst_ratio']:.4g}"
        )
        return result.summary["passed"]

    return run


def containment_runner(allow_unstable: bool) -> Runner:
    def run(config: ScenarioConfig, directory: Path) -> bool:
        result = report.containment(config, allow_unstable)
        report.write_containment_csv(directory, result)
        summary = report.containment_summary(config, result)
        report.write_json(directory / "containment.json", summary)
        return summary["passed"]

    return run


@cli.command()
@scenario_options
@click.pass_context
def analyze(ctx: click.Context, configs: Tuple[str, ...], out: Optional[Path], jobs: Optional[int]) -> None:
    """Stability of every weight pattern and the maximum stable step."""
    _dispatch(ctx, configs, out, jobs, analyze_runner)


@cli.command("simulate-ct")
@scenario_options
@click.pass_context
def simulate_ct(ctx: click.Context, configs: Tuple[str, ...], out: Optional[Path], jobs: Optional[int]) -> None:
    """Integrate the continuous-time protocol."""
    _dispatch(ctx, configs, out, jobs, ct_runner)


@cli.command("simulate-dt")
@scenario_options
@unstable_option
@click.pass_context
def simulate_dt(
    ctx: click.Context, configs: Tuple[str, ...], out: Optional[Path], jobs: Optional[int], allow_unstable: bool
) -> None:
    """Run the discrete-time protocol with dual-rate sampling."""
    _dispatch(ctx, configs, out, jobs, dt_runner(allow_unstable))


@cli.command()
@scenario_options
@unstable_option
@click.option("--mode", "-m", type=click.Choice(["auto", "ct", "dt"]), default="auto",
              help="Certificate kind; 'auto' picks dt when rates.delta_c is set")
@click.pass_context
def certify(
    ctx: click.Context,
    configs: Tuple[str, ...],
    out: Optional[Path],
    jobs: Optional[int],
    allow_unstable: bool,
    mode: str,
) -> None:
    """Fit a stability certificate, check it on held-out starts and test the error bound."""
    _dispatch(ctx, configs, out, jobs, certify_runner(None if mode == "auto" else mode, allow_unstable))


@cli.command()
@scenario_options
@unstable_option
@click.pass_context
def containment(
    ctx: click.Context, configs: Tuple[str, ...], out: Optional[Path], jobs: Optional[int], allow_unstable: bool
) -> None:
    """Drive followers to the centroid of observed leaders and check hull membership."""
    _dispatch(ctx, configs, out, jobs, containment_runner(allow_unstable))


@cli.command()
@click.argument("name", type=click.Choice(DEMO_NAMES))
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=0, help="Seed for the 'random' scenario")
@click.option("--out", "-o", type=click.Path(file_okay=False, path_type=Path), default=None)
@unstable_option
@click.pass_context
def demo(ctx: click.Context, name: str, seed: int, out: Optional[Path], allow_unstable: bool) -> None:
    """Run a built-in scenario and write its config next to the results.

    ``fig2`` integrates the continuous-time switching ring and ``fig4`` runs
    containment. ``random`` certifies a seeded discrete-time switching scenario.
    ``ring`` and ``leaders`` are aliases of ``fig2`` and ``fig4``.
    """
    name = ALIASES.get(name, name)
    config = demo_config(name, seed)
    directory = (out or _settings(ctx).out) / config.name
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.json").write_text(dump_config(config), encoding="utf-8")

    if name == "fig2":
        runner: Runner = ct_runner
    elif name == "fig4":
        runner = containment_runner(allow_unstable)
    else:
        runner = certify_runner("dt", allow_unstable)

    def both(config: ScenarioConfig, directory: Path) -> bool:
        analyzed = analyze_runner(config, directory)
        return runner(config, directory) and analyzed

    ctx.exit(_run_one(both, config, directory))


@cli.command()
@click.option(
    "--domains", "-d",
    multiple=True,
    default=["all"],
    help="Tool domain(s) to enable: 'all', or any of analysis, simulation, containment, certification",
)
@click.option("--mode", "-m", type=click.Choice(["stdio", "http"]), default="stdio",
              help="Server mode: 'stdio' for MCP client connection or 'http' for a web service")
@click.option("--host", default="127.0.0.1", help="HTTP server host (when mode=http)")
@click.option("--port", "-p", default=8000, type=int, help="HTTP server port (when mode=http)")
def serve(domains: Tuple[str, ...], mode: str, host: str, port: int) -> None:
    """Expose the scenario commands as MCP tools."""
    server = build_server(list(domains))
    if mode == "http":
        run_http_server(server, host, port)
    else:
        asyncio.run(server.run_stdio_async())


def build_server(domains: List[str]):
    """Create the MCP server with the tools of the enabled domains."""
    from mcp.server import FastMCP

    from active_consensus.tools import configure_all_tools

    enabled_domains = DomainsManager(domains).get_enabled_domains()
    server = FastMCP("Active Consensus")
    configure_all_tools(server, enabled_domains)
    logger.info("enabled tool domains: %s", ", ".join(sorted(enabled_domains)))
    return server


def run_http_server(server, host: str, port: int) -> None:
    # Import uvicorn only when needed for HTTP mode
    try:
        import uvicorn
    except ImportError:
        click.echo("uvicorn is required for HTTP mode. Install it with: pip install uvicorn", err=True)
        sys.exit(EXIT_FAILED)
    click.echo(f"Starting Active Consensus MCP server on http://{host}:{port}", err=True)
    uvicorn.run(server.streamable_http_app(), host=host, port=port)


def main() -> None:
    try:
        cli()
    except KeyboardInterrupt:
        click.echo("\nInterrupted by user", err=True)
        sys.exit(EXIT_FAILED)


if __name__ == "__main__":
    main()
