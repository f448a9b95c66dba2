"""Command-line client for the simulator service.

The CLI is a thin client: every verb except `serve` just calls the HTTP API
and formats the result. By default it drives the FastAPI app in-process
through an ASGI transport (no server, no socket, identical results); pass
--server to talk to a remote instance instead.

Exit codes: 0 success, 1 validation failure, 2 runtime failure inside a
simulation (invariant or protocol breach), 3 I/O error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx
import yaml

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

_KIND_EXIT = {"validation": EXIT_VALIDATION, "invariant": EXIT_RUNTIME, "protocol": EXIT_RUNTIME}


class ServiceFailure(Exception):
    def __init__(self, kind: str, detail):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail

    @property
    def exit_code(self) -> int:
        return _KIND_EXIT.get(self.kind, EXIT_RUNTIME)


class ServiceClient:
    """Request dispatcher: in-process ASGI by default, HTTP when a server is given."""

    def __init__(self, server: str | None = None):
        self._client = httpx.Client(base_url=server, timeout=600.0) if server else None

    def close(self) -> None:
        if self._client is not None:
            self._client.close()

    def get(self, path: str) -> dict:
        return self._payload(self._request("GET", path, None))

    def post(self, path: str, payload: dict) -> dict:
        return self._payload(self._request("POST", path, payload))

    def _request(self, method: str, path: str, payload: dict | None) -> httpx.Response:
        if self._client is not None:
            return self._client.request(method, path, json=payload)
        return asyncio.run(self._asgi_request(method, path, payload))

    @staticmethod
    async def _asgi_request(method: str, path: str, payload: dict | None) -> httpx.Response:
        # ASGITransport is async-only, so in-process calls go through a
        # transient AsyncClient; no sockets are involved either way.
        from .service import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service.internal", timeout=None
        ) as client:
            return await client.request(method, path, json=payload)

    @staticmethod
    def _payload(response: httpx.Response) -> dict:
        try:
            body = response.json()
        except ValueError:
            body = {"detail": response.text}
        if response.status_code >= 400:
            kind = body.get("kind", "validation" if response.status_code < 500 else "protocol")
            raise ServiceFailure(kind, body.get("errors") or body.get("detail") or body)
        return body


def _read_scenario(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ServiceFailure("validation", f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ServiceFailure("validation", f"{path}: expected a mapping at top level")
    return data


def _scenario_payload(args) -> dict:
    if args.scenario is not None:
        return {"scenario": _read_scenario(args.scenario)}
    return {"preset": args.preset}


def _parse_seeds(spec: str) -> list[int]:
    spec = spec.strip()
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in spec.split(",") if x.strip() != ""]


def _dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def cmd_validate(args, client: ServiceClient) -> int:
    result = client.post("/validate", _scenario_payload(args))
    if result["valid"]:
        print(f"ok: scenario {result['name']!r} is valid")
        return EXIT_OK
    for err in result["errors"] or []:
        loc = ".".join(err.get("loc") or []) or "<scenario>"
        print(f"invalid: {loc}: {err.get('msg')}", file=sys.stderr)
    return EXIT_VALIDATION


def cmd_run(args, client: ServiceClient) -> int:
    payload = _scenario_payload(args)
    payload.update(
        seed=args.seed,
        stride=args.stride,
        audit=args.audit,
        include_trace=args.out is not None,
        include_logs=args.out is not None,
    )
    result = client.post("/run", payload)
    if args.out is None:
        sys.stdout.write(_dump_json(result["summary"]))
        return EXIT_OK
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "beliefs.csv").write_text(result["beliefs_csv"], encoding="utf-8")
    (outdir / "events.csv").write_text(result["events_csv"], encoding="utf-8")
    (outdir / "messages.csv").write_text(result["messages_csv"], encoding="utf-8")
    (outdir / "summary.json").write_text(_dump_json(result["summary"]), encoding="utf-8")
    print(f"wrote beliefs.csv, events.csv, messages.csv, summary.json to {outdir}")
    return EXIT_OK


def cmd_sweep(args, client: ServiceClient) -> int:
    payload = _scenario_payload(args)
    payload.update(seeds=_parse_seeds(args.seeds), stride=args.stride, audit=args.audit)
    result = client.post("/sweep", payload)
    if args.out is None:
        sys.stdout.write(_dump_json(result["aggregate"]))
        return EXIT_OK
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for summary in result["summaries"]:
        seed_dir = outdir / f"seed_{summary['seed']}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        (seed_dir / "summary.json").write_text(_dump_json(summary), encoding="utf-8")
    (outdir / "aggregate.json").write_text(_dump_json(result["aggregate"]), encoding="utf-8")
    print(f"wrote {len(result['summaries'])} seed summaries and aggregate.json to {outdir}")
    return EXIT_OK


def cmd_presets(args, client: ServiceClient) -> int:
    for preset in client.get("/presets")["presets"]:
        print(f"{preset['name']}: {preset['description']}")
    return EXIT_OK


def cmd_bounds(args, client: ServiceClient) -> int:
    result = client.post("/bounds", _scenario_payload(args))
    sys.stdout.write(_dump_json(result["report"]))
    return EXIT_OK


def cmd_serve(args, _client=None) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _add_scenario_source(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", help="path to a scenario YAML file")
    group.add_argument("--preset", help="name of a built-in scenario")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minrule", description=__doc__)
    parser.add_argument("--server", default=None, help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario without running it")
    _add_scenario_source(p)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("run", help="simulate one seed")
    _add_scenario_source(p)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--stride", type=int, default=None, help="record every k-th step of the trace")
    p.add_argument("--audit", action="store_true", help="replay every logged broadcast against the trigger rules")
    p.add_argument("--out", default=None, help="directory for beliefs/events/messages CSVs and summary.json")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("sweep", help="simulate many seeds and aggregate")
    _add_scenario_source(p)
    p.add_argument("--seeds", required=True, help="seed list: 'A..B' inclusive or comma-separated")
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--audit", action="store_true")
    p.add_argument("--out", default=None, help="directory for per-seed summaries and aggregate.json")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("presets", help="list built-in scenarios")
    p.set_defaults(handler=cmd_presets)

    p = sub.add_parser("bounds", help="source sets, rate bounds, and bit thresholds")
    _add_scenario_source(p)
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.handler is cmd_serve:
        return cmd_serve(args)
    client = ServiceClient(args.server)
    try:
        return args.handler(args, client)
    except ServiceFailure as exc:
        print(f"error ({exc.kind}): {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except httpx.TransportError as exc:
        print(f"error (io): cannot reach service: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
