"""Operator command line.

Every subcommand except ``up`` talks to a running gateway over HTTP
(address from --url or RECONCELL_URL). ``up`` boots a cell from a scenario
file and serves the gateway in the foreground. Exit codes: 0 success,
1 domain error, 2 usage error. Commands that query state accept --json to
emit the gateway response verbatim for scripting.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import httpx

DEFAULT_URL = "http://127.0.0.1:8333"


def _make_client(url: str) -> httpx.Client:
    return httpx.Client(base_url=url, timeout=60.0)


class Api:
    def __init__(self, url: str):
        self.url = url
        self._client = None

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = _make_client(self.url)
        return self._client

    def call(self, method: str, path: str, **kw) -> httpx.Response:
        try:
            resp = self.client.request(method, path, **kw)
        except httpx.HTTPError as exc:
            click.echo(f"error: cannot reach gateway at {self.url}: {exc}", err=True)
            sys.exit(1)
        if resp.status_code >= 400:
            try:
                body = resp.json()
                detail = f"{body.get('error', 'error')}: {body.get('detail', '')}"
                if body.get("findings"):
                    detail += " " + json.dumps(body["findings"])
            except json.JSONDecodeError:
                detail = resp.text
            click.echo(f"error: {detail}", err=True)
            sys.exit(1)
        return resp


pass_api = click.make_pass_decorator(Api)


@click.group()
@click.option("--url", envvar="RECONCELL_URL", default=DEFAULT_URL,
              help="Gateway address (or RECONCELL_URL).")
@click.pass_context
def main(ctx, url):
    """Operator CLI for the simulated reconfigurable workcell."""
    ctx.obj = Api(url)


# -- bring-up ------------------------------------------------------------------

@main.command()
@click.option("--scenario", type=click.Path(exists=True), required=True,
              help="Scenario JSON describing modules, skills and sequences.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8333, show_default=True, type=int)
@click.option("--store", type=click.Path(), default=None,
              help="Skill store directory (default: in-memory).")
@click.option("--ui", type=click.Path(exists=True), default=None,
              help="Static pendant assets to serve at /.")
@click.option("--run-tape/--no-run-tape", default=False,
              help="Play the scenario's jog tape before serving.")
@click.option("--realtime/--max-speed", default=True,
              help="Pace simulation to wall clock, or run flat out.")
def up(scenario, host, port, store, ui, run_tape, realtime):
    """Boot registry, modules and gateway from a scenario file."""
    from .cell import load_scenario, run_scenario_tape
    from .gateway import serve

    cell = load_scenario(scenario, store_root=store)
    click.echo(f"cell '{cell.name}': {len(cell.registry.snapshot().modules)} modules, "
               f"{len(cell.store.names())} skills, sequences: {', '.join(cell.library.names()) or '-'}")
    if run_tape:
        version = run_scenario_tape(cell)
        if version is not None:
            click.echo(f"tape played; taught skill saved (version {version})")
    click.echo(f"gateway on http://{host}:{port}")
    serve(cell, host=host, port=port, static_path=ui, realtime=realtime)


# -- cell & modules ----------------------------------------------------------------

@main.command()
@click.option("--json", "as_json", is_flag=True)
@pass_api
def cell(api, as_json):
    """Show the live cell snapshot."""
    doc = api.call("GET", "/v1/cell").json()
    if as_json:
        click.echo(json.dumps(doc, indent=2))
        return
    mods = doc["modules"]
    click.echo(f"{len(mods)} modules (sim t={doc['sim_time']:.2f}s)")
    for m in mods:
        d = m["descriptor"]
        tool = doc["equipped_tools"].get(m["module_id"])
        extra = f" tool={tool['tool_id']}" if tool else ""
        click.echo(f"  {m['module_id']}  {d['name']:10s} {d['kind']:12s} {m['state']}{extra}")


@main.group()
def module():
    """Attach, detach, and command modules."""


@module.command("attach")
@click.argument("descriptor_file", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
@pass_api
def module_attach(api, descriptor_file, as_json):
    """Attach a stub module from a descriptor JSON file."""
    doc = json.loads(Path(descriptor_file).read_text())
    resp = api.call("POST", "/v1/modules", json=doc).json()
    click.echo(json.dumps(resp) if as_json else f"attached {resp['name']} as {resp['module_id']}")


@module.command("detach")
@click.argument("module_id")
@pass_api
def module_detach(api, module_id):
    api.call("POST", f"/v1/modules/{module_id}/detach")
    click.echo(f"detached {module_id}")


@module.command("cmd")
@click.argument("module_id")
@click.argument("verb")
@click.option("--params", default="{}", help="JSON params document.")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def module_cmd(api, module_id, verb, params, as_json):
    """Dispatch a verb and wait for its outcome."""
    try:
        params_doc = json.loads(params)
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"--params is not valid JSON: {exc}")
    doc = api.call("POST", f"/v1/modules/{module_id}/cmd",
                   json={"verb": verb, "params": params_doc}).json()
    if as_json:
        click.echo(json.dumps(doc))
    else:
        click.echo(f"{doc['outcome']} {json.dumps(doc['result']) if doc['result'] else ''}".strip())
    if doc["outcome"] != "SUCCEEDED":
        sys.exit(1)


# -- skills ------------------------------------------------------------------------

@main.group()
def skills():
    """Inspect and manage the skill database."""


@skills.command("ls")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def skills_ls(api, as_json):
    doc = api.call("GET", "/v1/skills").json()
    if as_json:
        click.echo(json.dumps(doc, indent=2))
        return
    for e in doc["skills"]:
        click.echo(f"{e['name']}@{e['version']} {e['kind']}")
    if not doc["skills"]:
        click.echo("no skills")


@skills.command("show")
@click.argument("name")
@click.option("--version", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@pass_api
def skills_show(api, name, version, as_json):
    params = {"version": version} if version else {}
    doc = api.call("GET", f"/v1/skills/{name}", params=params).json()
    if as_json:
        click.echo(json.dumps(doc, indent=2))
    else:
        n_samples = len(doc["payload"].get("samples", [])) if doc["kind"] == "TRAJECTORY" else "-"
        click.echo(f"{doc['name']}@{doc['version']} {doc['kind']} samples={n_samples} meta={json.dumps(doc['meta'])}")


@skills.command("history")
@click.argument("name")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def skills_history(api, name, as_json):
    doc = api.call("GET", f"/v1/skills/{name}/history").json()
    if as_json:
        click.echo(json.dumps(doc, indent=2))
        return
    for e in doc["versions"]:
        click.echo(f"{e['name']}@{e['version']} {e['kind']}")


@skills.command("rm")
@click.argument("name")
@pass_api
def skills_rm(api, name):
    api.call("DELETE", f"/v1/skills/{name}")
    click.echo(f"deleted {name}")


# -- teach -----------------------------------------------------------------------------

@main.group()
def teach():
    """Programming by demonstration."""


@teach.command("record")
@click.option("--robot", default="r1", show_default=True)
@click.option("--save", "save_as", required=True, help="Skill name for the recording.")
@click.option("--rate", default=50.0, show_default=True)
@click.option("--tape", type=click.Path(exists=True), default=None,
              help="Scripted stick tape (JSON) for headless teaching.")
@click.option("--seconds", default=2.0, show_default=True,
              help="Wall-clock recording window when no tape is given.")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def teach_record(api, robot, save_as, rate, tape, seconds, as_json):
    """Record a demonstration (live jog or scripted tape) and save it."""
    if tape:
        entries = json.loads(Path(tape).read_text())
        doc = api.call("POST", "/v1/teach/tape",
                       json={"robot": robot, "entries": entries,
                             "rate": rate, "save_as": save_as}).json()
    else:
        sid = api.call("POST", "/v1/teach/record/start",
                       json={"robot": robot, "rate": rate}).json()["session_id"]
        click.echo(f"recording session {sid} for {seconds}s; jog the robot now", err=True)
        time.sleep(seconds)
        api.call("POST", "/v1/teach/record/stop", json={"session_id": sid})
        doc = api.call("POST", "/v1/teach/save", json={"session_id": sid, "name": save_as}).json()
    click.echo(json.dumps(doc) if as_json else f"saved {doc['name']}@{doc['version']}")


# -- sequences ------------------------------------------------------------------------

@main.group()
def seq():
    """Compile, inspect and run assembly sequences."""


def _parse_args(arg_list) -> dict:
    args = {}
    for item in arg_list:
        if "=" not in item:
            raise click.UsageError(f"--arg must be key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            args[k] = json.loads(v)
        except json.JSONDecodeError:
            args[k] = v
    return args


@seq.command("compile")
@click.argument("source_file", type=click.Path(exists=True))
@click.option("--arg", "args", multiple=True, help="Parameter binding key=value.")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def seq_compile(api, source_file, args, as_json):
    body = {"text": Path(source_file).read_text(), "args": _parse_args(args)}
    doc = api.call("POST", "/v1/sequences", json=body).json()
    click.echo(json.dumps(doc) if as_json
               else f"compiled {doc['name']}: {doc['states']} states, hash {doc['source_hash'][:12]}")


@seq.command("ls")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def seq_ls(api, as_json):
    doc = api.call("GET", "/v1/sequences").json()
    click.echo(json.dumps(doc) if as_json else "\n".join(doc["sequences"]) or "no sequences")


@seq.command("listing")
@click.argument("name")
@pass_api
def seq_listing(api, name):
    click.echo(api.call("GET", f"/v1/sequences/{name}/listing").text, nl=False)


@seq.command("dot")
@click.argument("name")
@pass_api
def seq_dot(api, name):
    click.echo(api.call("GET", f"/v1/sequences/{name}/dot").text, nl=False)


@seq.command("validate")
@click.argument("name")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def seq_validate(api, name, as_json):
    doc = api.call("POST", f"/v1/sequences/{name}/validate").json()
    if as_json:
        click.echo(json.dumps(doc, indent=2))
        return
    if not doc["findings"]:
        click.echo("runnable: no findings")
        return
    for f in doc["findings"]:
        click.echo(f"{f['severity']}: {f['kind']} at {f['state']}: {f['detail']}")
    if not doc["runnable"]:
        sys.exit(1)


@seq.command("run")
@click.argument("name")
@click.option("--arg", "args", multiple=True, help="Recompile stored source with bindings first.")
@click.option("--follow/--no-follow", default=True,
              help="Stream events until the run finishes.")
@click.option("--json", "as_json", is_flag=True)
@pass_api
def seq_run(api, name, args, follow, as_json):
    """Run a compiled sequence, streaming its events to stdout."""
    if args:
        listing = api.call("GET", f"/v1/sequences/{name}/listing").text
        api.call("POST", "/v1/sequences", json={"text": listing, "args": _parse_args(args)})
    run = api.call("POST", f"/v1/sequences/{name}/run").json()
    run_id = run["run_id"]
    if not follow:
        click.echo(json.dumps(run) if as_json else run_id)
        return
    cursor = 1
    final = None
    while final is None:
        report = api.call("GET", f"/v1/runs/{run_id}").json()
        events = api.call("GET", "/v1/events", params={"from_seq": cursor}).json()["events"]
        for ev in events:
            cursor = ev["seq"] + 1
            if not as_json and ev["kind"] in ("STATE_ENTERED", "RUN_STARTED", "RUN_FINISHED",
                                              "BRAKE_CHANGED", "TOOL_CHANGED"):
                click.echo(f"[{ev['sim_time']:8.2f}] {ev['kind']:14s} {json.dumps(ev['payload'])}")
        final = report["final_outcome"]
        if final is None:
            time.sleep(0.05)
    if as_json:
        click.echo(json.dumps(api.call("GET", f"/v1/runs/{run_id}").json(), indent=2))
    else:
        click.echo(f"{name}: {final}")
    if final != "END_SUCCESS":
        sys.exit(1)


@main.command()
@pass_api
def events(api):
    """Dump the full event log."""
    doc = api.call("GET", "/v1/events", params={"from_seq": 1, "limit": 100000}).json()
    for ev in doc["events"]:
        click.echo(json.dumps(ev))


if __name__ == "__main__":
    main()
