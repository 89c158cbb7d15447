"""Operator command line: validate assets, serve, simulate, export, aggregate,
replay. Exit codes: 0 success, 1 validation findings, 2 usage/runtime error."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .aggregation import EMPTY, AGGREGATE_FNS, AggregateState, oracle_aggregate
from .asset import AssetRangeError, AssetSchemaError, AssetSyntaxError, parse_asset, validate_asset
from .service import ServiceCore
from .simulator import DivergenceDetectedError, SimulationLog, load_scenario, replay, run_scenario


@click.group()
def main() -> None:
    """Crowd-sensing experiment engine."""


def _emit(data: dict, fmt: str, text_lines: list[str]) -> None:
    if fmt == "json":
        click.echo(json.dumps(data, indent=2, default=str))
    else:
        for line in text_lines:
            click.echo(line)


@main.command()
@click.argument("asset_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def validate(asset_file: str, fmt: str) -> None:
    """Parse and validate an asset document."""
    try:
        asset = parse_asset(Path(asset_file).read_text(encoding="utf-8"))
    except (AssetSyntaxError, AssetSchemaError, AssetRangeError) as e:
        _emit({"error": str(e)}, fmt, [f"error: {e}"])
        sys.exit(2)
    report = validate_asset(asset)
    findings = [{"path": f.path, "message": f.message} for f in report.findings]
    _emit(
        {"findings": findings},
        fmt,
        [f"{len(findings)} findings"] + [f"  {f['path']}: {f['message']}" for f in findings],
    )
    sys.exit(0 if report.ok else 1)


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True), required=True,
              envvar="CROWDLAB_CONFIG")
def serve(config_file: str) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    config = json.loads(Path(config_file).read_text(encoding="utf-8"))
    core = ServiceCore(
        designer_token=config.get("designer_token", "designer-token"),
        secret=config.get("secret_key", "crowdlab-dev-secret").encode(),
    )
    data_dir = config.get("data_dir")
    events_path = Path(data_dir) / "events.ndjson" if data_dir else None
    if events_path and events_path.exists():
        core = ServiceCore.refold(
            ServiceCore.load_events(events_path),
            designer_token=core.designer_token, secret=core.secret,
        )
    app = create_app(core)
    host, _, port = config.get("listen", "127.0.0.1:8800").partition(":")
    try:
        uvicorn.run(app, host=host, port=int(port or 8800), log_level="warning")
    finally:
        if events_path:
            events_path.parent.mkdir(parents=True, exist_ok=True)
            core.save_events(events_path)


@main.command()
@click.option("--scenario", "scenario_file", type=click.Path(exists=True), required=True)
@click.option("--out", "out_file", type=click.Path(), required=True)
def simulate(scenario_file: str, out_file: str) -> None:
    """Run a scenario cohort and write the simulation log."""
    log = run_scenario(load_scenario(scenario_file))
    Path(out_file).write_text(log.to_json(), encoding="utf-8")
    click.echo(f"wrote {out_file}: {len(log.events)} events, task {log.task_id}")


@main.command("export")
@click.option("--task", "task_id", required=True)
@click.option("--log", "log_file", type=click.Path(exists=True), required=True)
@click.option("--out", "out_file", type=click.Path())
def export_cmd(task_id: str, log_file: str, out_file: str) -> None:
    """Write the documented export for a task from a simulation log."""
    log = SimulationLog.from_json(Path(log_file).read_text(encoding="utf-8"))
    core = ServiceCore.refold(log.events)
    text = core.export(task_id)
    if out_file:
        Path(out_file).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_file}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--log", "log_file", type=click.Path(exists=True), required=True)
@click.option("--fn", type=click.Choice(list(AGGREGATE_FNS)), default="avg")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def aggregate(log_file: str, fn: str, fmt: str) -> None:
    """Replay a simulation log through the aggregation engine and the
    brute-force oracle, printing both values."""
    log = SimulationLog.from_json(Path(log_file).read_text(encoding="utf-8"))
    core = ServiceCore.refold(log.events)
    engine_value = core.aggregates[log.task_id].read(fn)

    events = _aggregation_events(core, log.task_id)
    oracle_value = oracle_aggregate(events, fn)
    data = {
        "fn": fn,
        "engine": None if engine_value is EMPTY else engine_value,
        "oracle": None if oracle_value is EMPTY else oracle_value,
        "match": repr(engine_value) == repr(oracle_value)
        or (engine_value is not EMPTY and oracle_value is not EMPTY
            and abs(engine_value - oracle_value) < 1e-9),
    }
    _emit(data, fmt, [f"engine {fn} = {data['engine']}",
                      f"oracle {fn} = {data['oracle']}",
                      f"match: {data['match']}"])
    sys.exit(0 if data["match"] else 2)


def _aggregation_events(core: ServiceCore, task_id: str) -> list[tuple]:
    """Reconstruct the join/update/leave stream for a task by refolding the
    event log step by step with a shadow multiset."""
    shadow = ServiceCore()
    out: list[tuple] = []
    live: dict[str, float] = {}
    for ev in core.events:
        shadow.events.append(ev)
        shadow._apply(ev)
        agg = shadow.aggregates.get(task_id)
        if agg is None:
            continue
        now = {
            p: c.value for p, c in agg.contributions.items() if not c.tombstone
        }
        for p, v in now.items():
            if p not in live:
                out.append(("join", p, v))
            elif live[p] != v:
                out.append(("update", p, v))
        for p in list(live):
            if p not in now:
                out.append(("leave", p))
        live = now
    return out


@main.command("replay")
@click.option("--log", "log_file", type=click.Path(exists=True), required=True)
def replay_cmd(log_file: str) -> None:
    """Check that refolding a simulation log reproduces its export."""
    log = SimulationLog.from_json(Path(log_file).read_text(encoding="utf-8"))
    try:
        replay(log)
    except DivergenceDetectedError as e:
        click.echo(f"divergence: {e}")
        sys.exit(2)
    click.echo(f"replay ok: {len(log.events)} events, export byte-equal")
