"""Command-line entry points: the device server, the benchmark harness and
a thin management client that talks to the server's JSON API.
"""

from __future__ import annotations

import asyncio
import base64
import json
import os
import sys
from pathlib import Path

import click

from .auth import AuthPolicy
from .bench import check_orderings, emit_report, run_matrix
from .devicesim import DeviceSimulator, load_scenario, benchmark_workload
from .errors import RemoteFrameError
from .server import DEFAULT_CMD_PORT, DEFAULT_RFB_PORT, RemoteFrameServer
from .streams import PROFILES, TransportProfile


def _load_secret(secret_file: str | None) -> bytes | None:
    env = os.environ.get("REMOTEFRAME_SECRET")
    if env:
        return env.encode()
    if secret_file:
        return Path(secret_file).read_bytes().strip()
    return None


def _resolve_profile(name: str, bandwidth: float | None, latency: float, jitter: float) -> TransportProfile:
    if name == "custom":
        cap = int(bandwidth * 1024 * 1024) if bandwidth else None
        return TransportProfile("custom", cap, latency_ms=latency, jitter_ms=jitter)
    return PROFILES[name]


def _build_scenario(scenario_path: str | None, seed: int | None):
    script = load_scenario(scenario_path) if scenario_path else benchmark_workload()
    if seed is not None:
        from .devicesim import ScenarioScript

        script = ScenarioScript(
            script.width, script.height, seed, script.tap_skip, script.steps, script.sensors
        )
    return script


@click.group()
def main():
    """Remote control of a simulated mobile device."""


@main.command()
@click.option("--bind", default="127.0.0.1", show_default=True, help="Address to listen on.")
@click.option("--rfb-port", default=DEFAULT_RFB_PORT, show_default=True, type=int)
@click.option("--cmd-port", default=DEFAULT_CMD_PORT, show_default=True, type=int)
@click.option("--auth", "auth_mode", type=click.Choice(["none", "secret"]), default="none", show_default=True)
@click.option("--secret-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="File holding the shared secret (REMOTEFRAME_SECRET overrides).")
@click.option("--encrypt", is_flag=True, help="Wrap authenticated channels in a keystream (demo-grade).")
@click.option("--profile", type=click.Choice(["none", "usb", "wifi", "custom"]), default="none", show_default=True)
@click.option("--bandwidth", type=float, default=None, help="custom profile: MiB/s cap.")
@click.option("--latency", type=float, default=0.0, help="custom profile: one-way latency ms.")
@click.option("--jitter", type=float, default=0.0, help="custom profile: jitter ms.")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Scenario script file; defaults to the built-in workload.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--poll-interval", type=float, default=50.0, show_default=True, help="Screen poll interval ms.")
@click.option("--web / --no-web", default=False, help="Serve the browser viewer and JSON API.")
@click.option("--web-port", default=8000, show_default=True, type=int)
def serve(bind, rfb_port, cmd_port, auth_mode, secret_file, encrypt, profile, bandwidth,
          latency, jitter, scenario_path, seed, poll_interval, web, web_port):
    """Run the device server (RFB + command channel, optional web viewer)."""
    secret = _load_secret(secret_file)
    if auth_mode == "secret":
        if not secret:
            raise click.UsageError("--auth secret needs --secret-file or REMOTEFRAME_SECRET")
        policy = AuthPolicy.shared_secret(secret, encrypt_channel=encrypt)
    else:
        if encrypt:
            raise click.UsageError("--encrypt requires --auth secret")
        policy = AuthPolicy.open()

    script = _build_scenario(scenario_path, seed)
    device = DeviceSimulator(script)
    server = RemoteFrameServer(
        device,
        auth=policy,
        profile=_resolve_profile(profile, bandwidth, latency, jitter),
        poll_interval_s=poll_interval / 1000.0,
    )

    async def run_server():
        await server.start_tcp(bind, rfb_port, cmd_port)
        click.echo(f"rfb://{bind}:{rfb_port}  cmd://{bind}:{cmd_port}")
        tasks = []
        if web:
            import uvicorn

            from .web import create_app, default_viewer_dir

            app = create_app(server, default_viewer_dir())
            config = uvicorn.Config(app, host=bind, port=web_port, log_level="warning")
            web_server = uvicorn.Server(config)
            tasks.append(asyncio.ensure_future(web_server.serve()))
            click.echo(f"web: http://{bind}:{web_port}/viewer")
        try:
            await asyncio.Event().wait()
        except asyncio.CancelledError:
            pass
        finally:
            for task in tasks:
                task.cancel()
            await server.shutdown()

    try:
        asyncio.run(run_server())
    except KeyboardInterrupt:
        click.echo("shutting down")


@main.group()
def bench():
    """Encoding/transport benchmark harness."""


@bench.command("run")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--encodings", default="raw,rre,hextile,zlib,tight", show_default=True,
              help="Comma-separated encodings to benchmark.")
@click.option("--profiles", default="usb,wifi", show_default=True,
              help="Comma-separated transport profiles (none = unthrottled).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "table"]), default="table", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the report here instead of stdout.")
@click.option("--duration", type=float, default=None, help="Cap each run at this many seconds.")
@click.option("--seed", type=int, default=None)
@click.option("--repeat", type=int, default=1, show_default=True, help="Average this many runs per cell.")
@click.option("--check", is_flag=True, help="Exit nonzero if the expected encoding orderings do not hold.")
def bench_run(scenario_path, encodings, profiles, fmt, out, duration, seed, repeat, check):
    """Run the workload through encodings x profiles and report the metrics."""
    script = _build_scenario(scenario_path, seed)
    encoding_list = [e.strip() for e in encodings.split(",") if e.strip()]
    profile_list = [p.strip() for p in profiles.split(",") if p.strip()]

    async def run_all():
        return await run_matrix(
            script, encoding_list, profile_list,
            duration_cap_s=duration, seed=seed, repeat=repeat,
        )

    try:
        reports = asyncio.run(run_all())
    except RemoteFrameError as exc:
        raise click.ClickException(str(exc)) from exc

    rendered = emit_report(reports, fmt)
    if out:
        Path(out).write_bytes(rendered)
        click.echo(f"wrote {out}")
    else:
        click.echo(rendered.decode(), nl=False)

    if check:
        violations = check_orderings(reports)
        if violations:
            for violation in violations:
                click.echo(f"ORDERING VIOLATION: {violation}", err=True)
            sys.exit(1)
        click.echo("orderings hold", err=True)


@main.group()
def client():
    """Thin management client for a running server's JSON API."""


def _api(url: str, method: str, path: str, **kwargs):
    import httpx

    response = httpx.request(method, url.rstrip("/") + path, timeout=30.0, **kwargs)
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except Exception:
            detail = response.text
        raise click.ClickException(f"{response.status_code}: {detail}")
    return response


URL_OPTION = click.option("--url", default="http://127.0.0.1:8000", show_default=True,
                          help="Base URL of the server's web API.")


@client.command("status")
@URL_OPTION
def client_status(url):
    click.echo(json.dumps(_api(url, "GET", "/api/status").json(), indent=2))


@client.command("apps")
@click.option("--running", is_flag=True)
@URL_OPTION
def client_apps(url, running):
    apps = _api(url, "GET", "/api/apps", params={"running": running}).json()
    for app in apps:
        marker = "*" if app["running"] else " "
        click.echo(f"{marker} {app['package']:32s} {app['version']:8s} {app['name']}")


@client.command("install")
@click.argument("package_id")
@click.argument("apk", type=click.Path(exists=True, dir_okay=False))
@click.option("--version", default="1.0")
@click.option("--overwrite", is_flag=True)
@URL_OPTION
def client_install(url, package_id, apk, version, overwrite):
    payload = {
        "package": package_id,
        "version": version,
        "data_b64": base64.b64encode(Path(apk).read_bytes()).decode(),
        "overwrite": overwrite,
    }
    record = _api(url, "POST", "/api/apps/install", json=payload).json()
    click.echo(f"installed {record['package']} {record['version']}")


@client.command("processes")
@URL_OPTION
def client_processes(url):
    for proc in _api(url, "GET", "/api/processes").json():
        click.echo(f"{proc['pid']:5d} {proc['name']:32s} {proc['state']:9s} {proc['kind']}")


@client.command("kill")
@click.argument("pid", type=int)
@URL_OPTION
def client_kill(url, pid):
    _api(url, "POST", f"/api/processes/{pid}/kill")
    click.echo(f"killed {pid}")


@client.command("shell")
@click.argument("command")
@URL_OPTION
def client_shell(url, command):
    result = _api(url, "POST", "/api/shell", json={"command": command}).json()
    sys.stdout.write(result["stdout"])
    sys.stderr.write(result["stderr"])
    sys.exit(result["exit_code"])


@client.group("fs")
def client_fs():
    """Remote filesystem operations."""


@client_fs.command("ls")
@click.argument("path", default="/")
@URL_OPTION
def fs_ls(url, path):
    for node in _api(url, "GET", "/api/fs", params={"path": path}).json():
        suffix = "/" if node["kind"] == "dir" else f"  {node['size']}"
        click.echo(f"{node['path']}{suffix}")


@client_fs.command("get")
@click.argument("path")
@click.argument("dest", type=click.Path(dir_okay=False), required=False)
@URL_OPTION
def fs_get(url, path, dest):
    data = _api(url, "GET", "/api/fs/file", params={"path": path}).content
    if dest:
        Path(dest).write_bytes(data)
        click.echo(f"wrote {dest} ({len(data)} bytes)")
    else:
        sys.stdout.buffer.write(data)


@client_fs.command("put")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.argument("path")
@URL_OPTION
def fs_put(url, source, path):
    data = Path(source).read_bytes()
    _api(url, "PUT", "/api/fs/file", params={"path": path}, content=data)
    click.echo(f"uploaded {len(data)} bytes to {path}")


@client_fs.command("rm")
@click.argument("path")
@click.option("--recursive", "-r", is_flag=True)
@URL_OPTION
def fs_rm(url, path, recursive):
    _api(url, "DELETE", "/api/fs/file", params={"path": path, "recursive": recursive})
    click.echo(f"removed {path}")


@client.command("sensor")
@click.argument("kind")
@URL_OPTION
def client_sensor(url, kind):
    click.echo(json.dumps(_api(url, "GET", f"/api/sensors/{kind}").json(), indent=2))


if __name__ == "__main__":
    main()
