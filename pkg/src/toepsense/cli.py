"""Command-line client for the toepsense service.

Every subcommand talks HTTP to the service: either a remote instance given
by --server, or (by default) the service app mounted in-process, which needs
no running server.  Experiment artifacts returned by the service are written
into the output directory.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import sys
from pathlib import Path

import httpx


class InProcessTransport(httpx.BaseTransport):
    """Sync httpx transport that dispatches requests straight into an ASGI
    app, so the CLI works with no running server."""

    def __init__(self, app):
        self._app = app

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def _dispatch():
            transport = httpx.ASGITransport(app=self._app)
            try:
                response = await transport.handle_async_request(request)
                body = await response.aread()
            finally:
                await transport.aclose()
            return response, body

        response, body = asyncio.run(_dispatch())
        return httpx.Response(
            response.status_code, headers=response.headers, content=body
        )


DEFAULTS: dict[str, dict] = {
    "sweep": {},
    "image": {
        "m": 739,
        "k_grid": [2400],
        "trials": 1,
        "width": 64,
        "height": 64,
    },
    "sysid": {"k_grid": [200], "trials": 100},
    "pwc": {"n": 256, "m": 5, "k_grid": [80], "trials": 100, "matrix_kinds": ["sym_toeplitz"]},
    "rip_audit": {
        "n": 14,
        "m": 1,
        "k_grid": [10],
        "trials": 1,
        "matrix_kinds": ["sym_toeplitz", "left_sym_toeplitz", "iid_dense"],
    },
}


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service import app

    return httpx.Client(
        transport=InProcessTransport(app),
        base_url="http://toepsense.internal",
        timeout=None,
    )


def parse_k_grid(text: str) -> list[int]:
    """Either a comma list '60,80,100' or an inclusive range '60:260:20'."""
    if ":" in text:
        start, stop, step = (int(v) for v in text.split(":"))
        return list(range(start, stop + 1, step))
    return [int(v) for v in text.split(",")]


def _experiment_config(args, experiment: str) -> dict:
    doc = dict(DEFAULTS[experiment])
    if args.config:
        doc.update(json.loads(Path(args.config).read_text()))
    doc["experiment"] = experiment
    overrides = {
        "n": args.n,
        "m": args.m,
        "trials": args.trials,
        "master_seed": args.seed,
        "workers": args.workers,
        "output_dir": args.out,
        "dist": args.dist,
        "monte_carlo": args.monte_carlo,
    }
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value
    if args.k_grid is not None:
        doc["k_grid"] = parse_k_grid(args.k_grid)
    if args.kinds is not None:
        doc["matrix_kinds"] = args.kinds.split(",")
    doc.setdefault("output_dir", "out")
    return doc


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise SystemExit(f"error: {path} -> HTTP {resp.status_code}: {detail}")
    return resp.json()


def _write_artifacts(artifacts: dict, out_dir: str) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(artifacts):
        item = artifacts[name]
        blob = (
            base64.b64decode(item["data"])
            if item["encoding"] == "base64"
            else item["data"].encode()
        )
        (out / name).write_bytes(blob)
        written.append(str(out / name))
    return written


def _run_experiment(client: httpx.Client, args, experiment: str) -> int:
    cfg = _experiment_config(args, experiment)
    if args.print_config:
        print(json.dumps(cfg, sort_keys=True, indent=2))
        return 0
    payload: dict = {"config": cfg}
    if experiment == "image" and getattr(args, "image", None):
        payload["image_pgm_base64"] = base64.b64encode(
            Path(args.image).read_bytes()
        ).decode()
    body = _post(client, "/experiments/run", payload)
    written = _write_artifacts(body["artifacts"], cfg["output_dir"])
    for row in body["rows"]:
        if "success_rate" in row:
            print(
                f"{row['matrix_kind']:>18}  k={row['k']:<5} "
                f"success_rate={row['success_rate']:.3f}"
            )
        elif "mse" in row:
            print(f"{row['matrix_kind']:>18}  k={row['k']:<5} mse={row['mse']:.6f}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _gen_matrix(client: httpx.Client, args) -> int:
    descriptor: dict = {
        "kind": args.kind,
        "k": args.k,
        "n": args.n,
        "compose_D": args.compose_d,
        "dist": {"kind": args.dist or "gaussian", "k": args.k},
        "seed": {"master_seed": args.seed or 0, "stream_id": args.stream},
    }
    if args.theta:
        descriptor["theta"] = [int(t) for t in args.theta.split(",")]
    if args.print_config:
        print(json.dumps(descriptor, sort_keys=True, indent=2))
        return 0
    build = _post(client, "/operators/build", descriptor)
    dense = _post(client, "/operators/dense", descriptor)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "operator.json").write_text(
        json.dumps(build["operator"], sort_keys=True, indent=2) + "\n"
    )
    (out / "matrix.csv").write_text(dense["csv"])
    print(f"draws_consumed={build['draws_consumed']}")
    print(f"wrote {out / 'operator.json'}")
    print(f"wrote {out / 'matrix.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toepsense",
        description="Structured-Toeplitz compressed sensing experiments over HTTP",
    )
    parser.add_argument("--server", help="service URL; default runs the app in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel worker count")
        p.add_argument("--monte-carlo", type=int, dest="monte_carlo",
                       help="Monte Carlo trials where exact enumeration is refused")
        p.add_argument("--n", type=int)
        p.add_argument("--m", type=int, help="sparsity (the studies' other 'k')")
        p.add_argument("--trials", type=int)
        p.add_argument("--k-grid", dest="k_grid",
                       help="measurement counts: '60,80' or '60:260:20'")
        p.add_argument("--kinds", help="comma list of matrix kinds")
        p.add_argument("--dist", choices=["gaussian", "rademacher", "ternary"])
        p.add_argument("--print-config", action="store_true",
                       help="echo the fully resolved config and exit")

    for name in ("sweep", "sysid", "pwc"):
        add_common(sub.add_parser(name, help=f"run the {name} study"))
    image = sub.add_parser("image", help="image reconstruction study")
    add_common(image)
    image.add_argument("--image", help="input PGM file (default: synthetic sparse image)")
    audit = sub.add_parser("rip-audit", help="RIP certificate chain on a small instance")
    add_common(audit)

    gen = sub.add_parser("gen-matrix", help="materialize one operator to CSV + JSON")
    gen.add_argument("--kind", required=True,
                     choices=["iid_dense", "toeplitz", "sym_toeplitz", "left_sym_toeplitz"])
    gen.add_argument("--k", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--dist", choices=["gaussian", "rademacher", "ternary"])
    gen.add_argument("--seed", type=int)
    gen.add_argument("--stream", type=int, default=0)
    gen.add_argument("--theta", help="comma list of 1-based row indices")
    gen.add_argument("--compose-d", dest="compose_d", action="store_true")
    gen.add_argument("--out")
    gen.add_argument("--print-config", action="store_true")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    with make_client(args.server) as client:
        if args.command == "gen-matrix":
            return _gen_matrix(client, args)
        experiment = args.command.replace("-", "_")
        return _run_experiment(client, args, experiment)


if __name__ == "__main__":
    sys.exit(main())
