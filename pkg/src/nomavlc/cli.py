"""Command-line front end: a thin client of the HTTP service.

By default the CLI drives the FastAPI app in process (no server needed,
same code path as a deployed service); --server points it at a running
instance instead. All numeric work happens behind the API; the CLI only
builds requests, writes returned CSV artifacts under --out and maps
error classes to exit codes:

    0 success, 2 usage, 3 config parse error, 4 schema violation,
    5 invalid geometry, 6 runtime failure, 7 server unreachable
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_SCHEMA = 4
EXIT_GEOMETRY = 5
EXIT_RUNTIME = 6
EXIT_CONNECT = 7

_ERROR_EXITS = {"parse": EXIT_PARSE, "schema": EXIT_SCHEMA, "geometry": EXIT_GEOMETRY,
                "runtime": EXIT_RUNTIME}


class CliError(Exception):
    def __init__(self, code: int, kind: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.kind = kind
        self.detail = detail


def _fail(code: int, kind: str, detail: str) -> "CliError":
    return CliError(code, kind, detail)


def _load_config_dict(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _fail(EXIT_PARSE, "parse", f"cannot read config {path}: {exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail(EXIT_PARSE, "parse", f"config is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise _fail(EXIT_SCHEMA, "schema", "config root must be a JSON object")
    return data


class Client:
    """HTTP client that is in-process by default, remote with --server."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from fastapi.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(path, json=payload)
        except Exception as exc:
            raise _fail(EXIT_CONNECT, "connect", f"service unreachable: {exc}")
        return self._decode(resp)

    @staticmethod
    def _decode(resp) -> dict:
        try:
            body = resp.json()
        except Exception:
            raise _fail(EXIT_RUNTIME, "runtime", f"bad response ({resp.status_code})")
        if resp.status_code >= 400:
            kind = body.get("error", "runtime") if isinstance(body, dict) else "runtime"
            detail = body.get("detail", str(body)) if isinstance(body, dict) else str(body)
            raise _fail(_ERROR_EXITS.get(kind, EXIT_RUNTIME), kind, str(detail))
        return body


def _write_artifacts(out_dir: str, artifacts: list[dict]) -> list[str]:
    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    written = []
    for art in artifacts:
        name = Path(art["name"]).name  # never escape the output directory
        (base / name).write_text(art["content"])
        written.append(str(base / name))
    return written


def _job_payload(args) -> dict:
    payload: dict = {"config": _load_config_dict(args.config)}
    if args.seed is not None:
        payload["seed"] = args.seed
    if getattr(args, "variant", None):
        payload["variant"] = args.variant
    if getattr(args, "snr", None):
        payload["snr"] = args.snr
    return payload


def _run_job(args, path: str) -> int:
    client = Client(args.server)
    body = client.post(path, _job_payload(args))
    written = _write_artifacts(args.out, body.get("artifacts", []))
    for notice in body.get("notices", []):
        print(f"note: {notice}")
    for w in written:
        print(f"wrote {w}")
    return 0


def _run_theorem(args) -> int:
    client = Client(args.server)
    payload = {"config": _load_config_dict(args.config)}
    if args.seed is not None:
        payload["seed"] = args.seed
    body = client.post("/verify-theorem1", payload)
    written = _write_artifacts(args.out, body.get("artifacts", []))
    ok = body.get("all_hold", False)
    n = len(body.get("cases", []))
    print(f"rate-gap bound held in {sum(1 for c in body['cases'] if c['holds'])}/{n} cases")
    for w in written:
        print(f"wrote {w}")
    return 0 if ok else EXIT_RUNTIME


def _run_mu_ladder(args) -> int:
    client = Client(args.server)
    cfg = _load_config_dict(args.config)
    payload: dict = {"modulation": cfg.get("modulation", 4)}
    if "qos_rates" in cfg:
        payload["qos_rates"] = cfg["qos_rates"][: cfg.get("num_users", 2)]
    body = client.post("/mu-ladder", payload)
    print("powers:", ",".join(f"{p:.10g}" for p in body["powers"]))
    for layer in body["layers"]:
        mods = ",".join(f"{m:.10g}" for m in layer["moduli"])
        print(f"layer {layer['layer']}: {mods}")
    for b in body["bounds"]:
        print(
            f"noise_variance={b['noise_variance']:.10g} "
            f"p_sqrt_m={b['p_sqrt_m']:.10g} p_m={b['p_m']:.10g}"
        )
    return 0


def _run_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nomavlc",
        description="Link-level simulator for nonlinear-LED MIMO NOMA visible-light downlinks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, variant=True, snr=True):
        p.add_argument("--config", help="JSON config file (missing fields take defaults)")
        p.add_argument("--out", default="out", help="output directory for artifacts")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--server", help="base URL of a running service (default: in-process)")
        if variant:
            p.add_argument("--variant", choices=["proposed", "grpa", "zf", "linear-ideal"],
                           help="restrict the run to one variant")
        if snr:
            p.add_argument("--snr", help="SNR grid override, 'lo:hi:step' in dB")

    common(sub.add_parser("channel", help="write per-user channel matrices"), variant=False, snr=False)
    common(sub.add_parser("train", help="train the pre-distorter, write weights and MSE trace"))
    common(sub.add_parser("sweep-ber", help="BER vs SNR sweep, one CSV per modulation/user-count"))
    common(sub.add_parser("sum-rate", help="sum rate vs number of users with admission control"))
    common(sub.add_parser("verify-theorem1", help="sampled rate-gap bound check"),
           variant=False, snr=False)
    common(sub.add_parser("mu-ladder", help="print the composite-modulus ladder and BER bound"),
           variant=False, snr=False)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "channel":
            return _run_job(args, "/channel")
        if args.command == "train":
            return _run_job(args, "/train")
        if args.command == "sweep-ber":
            return _run_job(args, "/sweep-ber")
        if args.command == "sum-rate":
            return _run_job(args, "/sum-rate")
        if args.command == "verify-theorem1":
            return _run_theorem(args)
        if args.command == "mu-ladder":
            return _run_mu_ladder(args)
        if args.command == "serve":
            return _run_serve(args)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except CliError as err:
        print(json.dumps({"error": err.kind, "detail": err.detail}), file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
