"""Command-line client for the decoreg service.

Every subcommand builds a request, sends it to the FastAPI app, and writes
the returned artifacts locally.  By default requests run in-process through
an ASGI transport (no server needed); `--server URL` targets a remote
instance started with `deco serve`.

Exit codes: 0 success, 1 config/usage error, 2 every replication failed,
3 some replications failed.
"""

from __future__ import annotations

import asyncio
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import click
import httpx

from .errors import ConfigError
from .experiments import ExperimentConfig, load_config, write_rows_csv


class ServiceClient:
    """Minimal HTTP client; in-process ASGI unless a server URL is given."""

    def __init__(self, server: str | None = None) -> None:
        self.server = server

    def request(self, method: str, path: str, body: dict | None = None) -> httpx.Response:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as c:
                return c.request(method, path, json=body)
        from .service import app

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://deco.internal", timeout=None
            ) as c:
                return await c.request(method, path, json=body)

        return asyncio.run(go())


def _detail(response: httpx.Response) -> str:
    try:
        detail = response.json().get("detail")
    except ValueError:
        return response.text.strip()
    if isinstance(detail, list):  # pydantic validation report
        return "; ".join(
            f"{'.'.join(str(x) for x in e.get('loc', []))}: {e.get('msg')}" for e in detail
        )
    return str(detail)


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _call(client: ServiceClient, method: str, path: str, body: dict | None = None):
    try:
        r = client.request(method, path, body)
    except httpx.HTTPError as exc:
        _fail(f"service unreachable: {exc}")
    if r.status_code >= 400:
        _fail(_detail(r))
    return r


def _load(config_path: str) -> ExperimentConfig:
    try:
        return load_config(config_path)
    except FileNotFoundError:
        _fail(f"no config file at {config_path}")
    except ConfigError as exc:
        _fail(str(exc))


def _apply_seed(cfg: ExperimentConfig, seed: int | None) -> None:
    # one flag pins every seed in the run: data model, algorithm, harness
    if seed is None:
        return
    cfg.seed = seed
    cfg.deco = replace(cfg.deco, seed=seed)
    if cfg.model is not None:
        cfg.model = replace(cfg.model, seed=seed)


def _data_source(cfg: ExperimentConfig) -> dict:
    if cfg.model is not None:
        return {"model": asdict(cfg.model)}
    try:
        text = Path(cfg.csv).read_text()
    except OSError as exc:
        _fail(f"cannot read {cfg.csv}: {exc}")
    return {"csv": {"text": text, "response": cfg.response}}


def _experiment_body(cfg: ExperimentConfig, threads: int) -> dict:
    body = _data_source(cfg)
    body.update(
        methods=cfg.methods,
        replications=cfg.replications,
        m_values=cfg.m_values,
        deco=asdict(cfg.deco),
        seed=cfg.seed,
        threads=threads,
        holdout_fraction=cfg.holdout_fraction,
    )
    return body


server_option = click.option(
    "--server", default=None, metavar="URL", help="Remote service URL (default: in-process)."
)
seed_option = click.option("--seed", type=int, default=None, help="Override every seed in the config.")
config_option = click.option(
    "--config", "config_path", required=True, metavar="PATH", help="Experiment config file."
)


@click.group()
def main() -> None:
    """Decorrelated feature-split regression toolkit."""


@main.command()
@server_option
def version(server: str | None) -> None:
    """Print the package (or remote service) version."""
    out = _call(ServiceClient(server), "GET", "/version").json()
    click.echo(f"{out['name']} {out['version']}")


@main.command()
@config_option
@seed_option
@click.option("--out", default="dataset.csv", metavar="PATH", help="CSV output path.")
@server_option
def gen(config_path: str, seed: int | None, out: str, server: str | None) -> None:
    """Draw a synthetic dataset; write a CSV plus a JSON sidecar."""
    cfg = _load(config_path)
    _apply_seed(cfg, seed)
    if cfg.model is None:
        _fail("gen needs a model section in the config")
    client = ServiceClient(server)
    info = _call(client, "POST", "/datasets", asdict(cfg.model)).json()
    text = _call(client, "GET", f"/datasets/{info['id']}/csv").text
    side = _call(client, "GET", f"/datasets/{info['id']}/sidecar").json()
    out_path = Path(out)
    out_path.write_text(text)
    side_path = out_path.with_suffix(".json")
    side_path.write_text(json.dumps(side, indent=2) + "\n")
    click.echo(f"wrote {out_path} ({info['n']} rows, {info['p']} predictors) and {side_path}")


@main.command()
@config_option
@seed_option
@click.option(
    "--threads",
    type=int,
    default=None,
    envvar="DECO_THREADS",
    help="Worker threads (DECO_THREADS as fallback; speed only, never results).",
)
@click.option("--out", default=None, metavar="PATH", help="Results CSV path (default: config output or results.csv).")
@server_option
def fit(
    config_path: str,
    seed: int | None,
    threads: int | None,
    out: str | None,
    server: str | None,
) -> None:
    """Run the configured replication sweep; write per-rep and mean rows."""
    cfg = _load(config_path)
    _apply_seed(cfg, seed)
    if threads is None:
        threads = cfg.threads
    body = _experiment_body(cfg, threads)
    res = _call(ServiceClient(server), "POST", "/experiments", body).json()
    out_path = Path(out or cfg.output or "results.csv")
    rows = res["rows"]
    write_rows_csv(out_path, rows, res["aggregates"])
    click.echo(f"wrote {out_path} ({res['n_units']} units, {res['n_failed']} failed)")
    for agg in res["aggregates"]:
        mse = agg["mse"] if agg["mse"] != "" else "-"
        click.echo(f"  {agg['method']} m={agg['m']}: mean mse {mse}")
    if res["n_failed"]:
        for row in rows:
            if row["error"]:
                click.echo(f"  failed: {row['method']} m={row['m']} rep={row['rep']}: {row['error']}", err=True)
    sys.exit(res["exit_status"])


@main.command()
@config_option
@seed_option
@click.option("--identity", is_flag=True, help="Replace the whitening factor by I (null check).")
@click.option("--out", default=None, metavar="PATH", help="Write the JSON report here instead of stdout.")
@server_option
def diag(
    config_path: str,
    seed: int | None,
    identity: bool,
    out: str | None,
    server: str | None,
) -> None:
    """Raw-vs-decorrelated design diagnostics for the configured data."""
    cfg = _load(config_path)
    _apply_seed(cfg, seed)
    body = _data_source(cfg)
    body["config"] = asdict(cfg.deco)
    body["identity"] = identity
    res = _call(ServiceClient(server), "POST", "/diagnostics", body).json()
    text = json.dumps(res, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service under uvicorn."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
