"""Command line front door: serve, run-scenario, submit, inspect, validate.

Exit codes: 0 success, 1 validation failure, 2 runtime subscription failure.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import threading
from pathlib import Path

import click
import httpx

from .acquisition import load_sdd
from .clock import RealClock
from .dissemination import validate_request
from .engine import boot, load_scenario_config, run_scenario
from .errors import SenseflowError
from .knowledge import parse_domain

DEFAULT_URL = "http://127.0.0.1:8732"


@click.group()
def main():
    """Sensing-as-a-service middleware engine."""


@main.command("run-scenario")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--duration-ms", type=int, default=None, help="Override the configured run duration.")
@click.option("--clock", type=click.Choice(["simulated", "real"]), default=None)
def run_scenario_cmd(config_path, out_dir, duration_ms, clock):
    """Replay a scenario end-to-end and write delivery files plus a report."""
    try:
        config = load_scenario_config(Path(config_path))
        if duration_ms is not None:
            config = dataclasses.replace(config, run_for_ms=duration_ms)
        if clock is not None:
            config = dataclasses.replace(config, clock_mode=clock)
        report = run_scenario(config, Path(out_dir))
    except SenseflowError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        sys.exit(1)
    for sub in report["subscriptions"]:
        click.echo(
            f"{sub['subscription_id']} user={sub['user_id']} "
            f"delivered={sub['delivered']} state={sub['state']}"
        )
    sys.exit(report["exit_status"])


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8732, type=int)
def serve(config_path, host, port):
    """Boot from a scenario config and expose the HTTP endpoint."""
    import uvicorn

    from .webapp import create_app

    try:
        config = load_scenario_config(Path(config_path))
        engine = boot(config)
    except SenseflowError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        sys.exit(1)

    if isinstance(engine.clock, RealClock):
        def pump():
            while True:
                engine.run_for(200)

        threading.Thread(target=pump, daemon=True).start()

    uvicorn.run(create_app(engine), host=host, port=port)


@main.command()
@click.argument("request_file", type=click.Path(exists=True))
@click.option("--url", default=DEFAULT_URL, show_default=True)
def submit(request_file, url):
    """Submit a request document to a running engine."""
    body = Path(request_file).read_bytes()
    response = httpx.post(f"{url}/requests", content=body)
    click.echo(json.dumps(response.json(), indent=2))
    sys.exit(0 if response.status_code == 200 else 1)


@main.command()
@click.argument("kind", type=click.Choice(["sensors", "attributes", "plans", "operators", "subscriptions"]))
@click.option("--url", default=DEFAULT_URL, show_default=True)
def inspect(kind, url):
    """List engine state from a running endpoint."""
    response = httpx.get(f"{url}/inspect/{kind}")
    click.echo(json.dumps(response.json(), indent=2))
    sys.exit(0 if response.status_code == 200 else 1)


@main.command()
@click.option("--kind", type=click.Choice(["sdd", "domain", "request"]), required=True)
@click.argument("files", nargs=-1, type=click.Path(exists=True))
def validate(kind, files):
    """Offline validation of SDD, domain, or request documents."""
    failures = 0
    for file in files:
        data = Path(file).read_bytes()
        try:
            if kind == "sdd":
                load_sdd(data)
            elif kind == "domain":
                parse_domain(data)
            else:
                validate_request(data)
            click.echo(f"{file}: ok")
        except SenseflowError as exc:
            failures += 1
            click.echo(f"{file}: error [{exc.code}]: {exc}", err=True)
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
