"""Command-line front door: a thin client of the verification service.

Every invocation builds one request, sends it to the service (an in-process
ASGI app by default, or a remote instance via --server), writes the full
report to --out, and prints a short summary.  Exit codes: 0 all checks pass,
1 at least one bound violation beyond tolerance, 2 usage or parse error,
3 numerical failure (unresolved truncation, eigensolver breakdown).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

from . import __version__
from .bounds import parse_constants_file
from .errors import SpecParseError
from .harness import BOUND_NAMES, summarize
from .service.app import MANIFOLD_EXAMPLES

_EPILOG = (
    "manifold kinds: " + ", ".join(MANIFOLD_EXAMPLES) + "\n"
    "bound selectors: " + ", ".join(BOUND_NAMES) + "\n"
    "t-grid grammar: lo:hi:lin|log:count (e.g. 0.01:10:log:50)"
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="heatlab",
        description="Heat-kernel gradient-bound verification lab",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"heatlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--server", default=None,
                        help="base URL of a running service; default runs in-process")
        if out:
            sp.add_argument("--out", default=None, help="write the full report here")
            sp.add_argument("--format", choices=("json", "csv"), default="json")

    k = sub.add_parser("kernel", help="evaluate G(x,t,y) and its log-derivatives")
    k.add_argument("--manifold", required=True)
    k.add_argument("--x", required=True, help="comma-separated chart coordinates")
    k.add_argument("--y", required=True)
    k.add_argument("--t", type=float, required=True)
    common(k)

    c = sub.add_parser("check", help="margins of one bound over a grid",
                       epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    c.add_argument("--manifold", required=True)
    c.add_argument("--bound", required=True, choices=BOUND_NAMES)
    c.add_argument("--tgrid", default="0.1:10:log:20")
    c.add_argument("--res", type=int, default=128)
    c.add_argument("--poles", type=int, default=8)
    c.add_argument("--window", type=float, default=6.0)
    c.add_argument("--constants", default=None, help="key=value overrides file")
    c.add_argument("--alpha", type=float, default=2.0)
    c.add_argument("--t0", type=float, default=0.5)
    c.add_argument("--trials", type=int, default=500)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--fit", action="store_true",
                   help="attach the minimal-constant fit (sharp-compact only)")
    common(c)

    s = sub.add_parser("sweep", help="per-t suprema of t*Y")
    s.add_argument("--manifold", required=True)
    s.add_argument("--tgrid", default="0.1:10:log:20")
    s.add_argument("--res", type=int, default=128)
    s.add_argument("--poles", type=int, default=8)
    s.add_argument("--window", type=float, default=6.0)
    s.add_argument("--no-refine", action="store_true")
    common(s)

    x = sub.add_parser("counterexample",
                       help="hyperbolic-space scan showing t*Y grows like d(x,y)")
    x.add_argument("--h3", action="store_true", required=True)
    x.add_argument("--rmax", type=float, default=40.0)
    x.add_argument("--t", type=float, default=1.0)
    x.add_argument("--steps", type=int, default=40)
    common(x)

    pr = sub.add_parser("product", help="t*Y additivity on M0 x R")
    pr.add_argument("--manifold", required=True, help="the compact factor M0")
    pr.add_argument("--tgrid", default="0.1:2:log:5")
    pr.add_argument("--res", type=int, default=128)
    pr.add_argument("--points", type=int, default=200)
    pr.add_argument("--seed", type=int, default=0)
    common(pr)

    tr = sub.add_parser("transfer", help="mixture solutions vs kernel suprema")
    tr.add_argument("--manifold", required=True)
    tr.add_argument("--trials", type=int, default=50)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--tgrid", default="0.05:2:log:6")
    tr.add_argument("--res", type=int, default=128)
    common(tr)

    f = sub.add_parser("fit", help="empirical minimal sharp-bound constants")
    f.add_argument("--manifold", required=True)
    f.add_argument("--tgrid", default="0.05:10:log:20")
    f.add_argument("--res", type=int, default=64)
    f.add_argument("--poles", type=int, default=8)
    common(f)

    v = sub.add_parser("validate", help="spectral solver vs exact flat torus")
    v.add_argument("--radius", type=float, default=1.0)
    v.add_argument("--a", type=float, default=1.0)
    v.add_argument("--grid-n", type=int, default=2048)
    v.add_argument("--eigs", type=int, default=25)
    v.add_argument("--no-refinement", action="store_true")
    common(v)
    return p


_CSV_COMMANDS = ("check", "sweep", "counterexample")


def _request_for(args) -> tuple[str, dict]:
    cmd = args.command
    if getattr(args, "format", "json") == "csv" and cmd not in _CSV_COMMANDS:
        raise SpecParseError(
            f"--format csv is available for {', '.join(_CSV_COMMANDS)}; "
            f"the {cmd} report is JSON only")
    if cmd == "kernel":
        return "/kernel", {
            "manifold": args.manifold,
            "x": _coords(args.x, "--x"), "y": _coords(args.y, "--y"), "t": args.t}
    if cmd == "check":
        payload = {
            "manifold": args.manifold, "bound": args.bound, "tgrid": args.tgrid,
            "res": args.res, "poles": args.poles, "window": args.window,
            "alpha": args.alpha, "t0": args.t0, "trials": args.trials,
            "seed": args.seed, "fit": args.fit, "format": args.format}
        if args.constants:
            payload["constants"] = {
                k: v for k, v in parse_constants_file(args.constants).as_dict().items()
                if v is not None}
        return "/check", payload
    if cmd == "sweep":
        return "/sweep", {
            "manifold": args.manifold, "tgrid": args.tgrid, "res": args.res,
            "poles": args.poles, "window": args.window,
            "refine": not args.no_refine, "format": args.format}
    if cmd == "counterexample":
        return "/counterexample", {"h3": args.h3, "rmax": args.rmax,
                                   "t": args.t, "steps": args.steps,
                                   "format": args.format}
    if cmd == "product":
        return "/product", {"manifold": args.manifold, "tgrid": args.tgrid,
                            "res": args.res, "points": args.points,
                            "seed": args.seed}
    if cmd == "transfer":
        return "/transfer", {"manifold": args.manifold, "trials": args.trials,
                             "seed": args.seed, "tgrid": args.tgrid,
                             "res": args.res}
    if cmd == "fit":
        return "/fit", {"manifold": args.manifold, "tgrid": args.tgrid,
                        "res": args.res, "poles": args.poles}
    if cmd == "validate":
        return "/validate", {"radius": args.radius, "a": args.a,
                             "grid_n": args.grid_n, "n_eigs": args.eigs,
                             "refinement": not args.no_refinement}
    raise SpecParseError(f"unknown command {cmd!r}")


def _coords(s: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in s.split(",")]
    except ValueError:
        raise SpecParseError(f"{flag} expects comma-separated numbers, got {s!r}")


async def _post(server: str | None, path: str, payload: dict):
    if server:
        async with httpx.AsyncClient(base_url=server, timeout=600.0) as client:
            resp = await client.post(path, json=payload)
            return resp.status_code, resp.headers.get("content-type", ""), resp.content
    from .service import create_app
    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(transport=transport,
                                 base_url="http://heatlab.local",
                                 timeout=600.0) as client:
        resp = await client.post(path, json=payload)
        return resp.status_code, resp.headers.get("content-type", ""), resp.content


def _passed(path: str, body: dict) -> bool:
    if path == "/check":
        return bool(body.get("passed", True))
    if path == "/transfer":
        return bool(body.get("all_within", True))
    if path == "/product":
        return bool(body.get("passed", True))
    return True


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        path, payload = _request_for(args)
    except SpecParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if getattr(args, "out", None):
        parent = os.path.dirname(os.path.abspath(args.out))
        if not os.path.isdir(parent):
            print(f"error: output directory {parent!r} does not exist",
                  file=sys.stderr)
            return 2

    status, ctype, content = asyncio.run(_post(args.server, path, payload))

    if status in (400, 422):
        print(f"error: {_error_message(content)}", file=sys.stderr)
        return 2
    if status == 409:
        print(f"numerical failure: {_error_message(content)}", file=sys.stderr)
        return 3
    if status != 200:
        print(f"service error ({status}): {_error_message(content)}", file=sys.stderr)
        return 3

    if getattr(args, "out", None):
        mode = "wb"
        with open(args.out, mode) as fh:
            fh.write(content)

    if ctype.startswith("text/csv"):
        lines = content.decode().count("\n")
        target = args.out or "stdout"
        print(f"{args.command}: wrote {lines} CSV lines to {target}")
        if not getattr(args, "out", None):
            sys.stdout.write(content.decode())
        return 0

    body = json.loads(content)
    print(summarize(body))
    return 0 if _passed(path, body) else 1


def _error_message(content: bytes) -> str:
    try:
        body = json.loads(content)
    except json.JSONDecodeError:
        return content.decode(errors="replace")[:500]
    if "message" in body:
        return body["message"]
    return json.dumps(body)[:500]


if __name__ == "__main__":
    sys.exit(main())
