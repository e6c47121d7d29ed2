"""Command line interface: one subcommand per stage plus serve.

Stages run in-process against the workspace by default; pass --server to act
as a thin client against a running qaforge service instead.
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .errors import QaForgeError
from .pipeline import STAGES, PipelineConfig, build_providers, run_all, run_stage
from .workspace import Workspace

logger = logging.getLogger(__name__)


@click.group()
@click.version_option(package_name="qaforge")
def main() -> None:
    """Build, curate, split, evaluate, and export QA datasets."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _run_remote(server: str, stage: str) -> None:
    import httpx

    response = httpx.post(f"{server.rstrip('/')}/stages/{stage}/run", json={}, timeout=None)
    if response.status_code >= 400:
        body = response.json()
        raise click.ClickException(f"{body.get('error', response.status_code)}: {body.get('detail', '')}")
    state = response.json()
    click.echo(f"{stage}: {state['state']} ({state.get('output_hash', '')[:12]})")


def _run_local(stage: str, config_path: str, workspace_path: str) -> None:
    config = PipelineConfig.from_file(config_path)
    workspace = Workspace(workspace_path)
    providers = build_providers(config, workspace)
    try:
        entry = run_stage(stage, config, workspace, providers)
    except QaForgeError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{stage}: {entry.state.value} ({entry.output_hash[:12]})")


def _stage_command(stage: str):
    @click.option("--config", "config_path", required=False, type=click.Path(exists=True, dir_okay=False))
    @click.option("--workspace", "workspace_path", required=False, type=click.Path(file_okay=False))
    @click.option("--server", "server", required=False, help="Run through a qaforge service instead of in-process")
    def command(config_path: str | None, workspace_path: str | None, server: str | None) -> None:
        if server:
            _run_remote(server, stage)
            return
        if not config_path or not workspace_path:
            raise click.UsageError("--config and --workspace are required without --server")
        _run_local(stage, config_path, workspace_path)

    command.__name__ = stage
    command.__doc__ = f"Run the {stage} stage."
    return command


for _stage in STAGES:
    main.command(name=_stage)(_stage_command(_stage))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workspace", "workspace_path", required=True, type=click.Path(file_okay=False))
@click.option("--through", default="export", type=click.Choice(STAGES))
def run(config_path: str, workspace_path: str, through: str) -> None:
    """Run every stage in order up to --through."""
    config = PipelineConfig.from_file(config_path)
    workspace = Workspace(workspace_path)
    providers = build_providers(config, workspace)
    try:
        states = run_all(config, workspace, providers, through=through)
    except QaForgeError as exc:
        raise click.ClickException(str(exc)) from exc
    for stage, entry in states.items():
        click.echo(f"{stage}: {entry.state.value}")


@main.command()
@click.option("--workspace", "workspace_path", required=True, type=click.Path(file_okay=False))
@click.option("--bind", default="127.0.0.1:8080", show_default=True)
@click.option("--config", "config_path", required=False, type=click.Path(exists=True, dir_okay=False))
def serve(workspace_path: str, bind: str, config_path: str | None) -> None:
    """Serve the review API (and UI bundle, when built) for a workspace."""
    import uvicorn

    from .service import create_app

    host, _, port = bind.partition(":")
    if not port:
        raise click.UsageError("--bind must look like HOST:PORT")
    app = create_app(Path(workspace_path), config_path)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
    except OSError as exc:
        click.echo(f"bind failure: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
