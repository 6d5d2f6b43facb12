"""Command-line interface: a thin client over the service handlers.

Every subcommand builds the same request models the HTTP service accepts
and either executes them in process (default) or forwards them to a
running service given via --server / SG3D_SERVER. Exit codes: 0 success,
2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .config import RunConfig, load_config
from .exceptions import EXIT_DATA, EXIT_NUMERICAL, EXIT_USAGE, Sg3dError
from .service import handlers
from .service.models import (BaselineRequest, DegradeRequest, MetricsRequest,
                             PhantomRequest, ReconstructRequest,
                             SchedulePreviewRequest)


def _fail(code: int, kind: str, msg: str):
    msg = " ".join(str(msg).split())
    print(f'error: type={kind} msg="{msg}"', file=sys.stderr)
    sys.exit(code)


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx
    try:
        resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=600.0)
    except httpx.HTTPError as err:
        _fail(EXIT_DATA, "ServerUnreachable", str(err))
    if resp.status_code >= 400:
        detail = resp.json().get("detail", resp.text)
        _fail(EXIT_DATA if resp.status_code < 500 else EXIT_NUMERICAL,
              "ServerError", str(detail))
    return resp.json()


def _run(server: str | None, route: str, handler, req, quiet=False):
    """Dispatch one request in process or to the service; returns a dict."""
    if server:
        return _post(server, route, json.loads(req.model_dump_json(by_alias=True)))
    try:
        out = handler(req)
    except Sg3dError as err:
        _fail(err.exit_code, type(err).__name__, str(err))
    return out if isinstance(out, (dict, str)) else json.loads(out.model_dump_json())


def cmd_phantom(args, server):
    fields = {}
    if args.spec:
        fields = json.loads(Path(args.spec).read_text())
    if args.dims:
        fields["dims"] = tuple(int(v) for v in args.dims.split(","))
    if args.kind:
        fields["kind"] = args.kind
    if args.seed is not None:
        fields["seed"] = args.seed
    req = PhantomRequest(out=args.out, **fields)
    info = _run(server, "/v1/phantom", handlers.handle_phantom, req)
    print(json.dumps(info))


def cmd_degrade(args, server):
    req = DegradeRequest(**{"in": args.in_path}, out=args.out, factor=args.factor,
                         sigma=args.sigma, seed=args.seed, axes=args.axes)
    info = _run(server, "/v1/degrade", handlers.handle_degrade, req)
    print(json.dumps(info))


def _reconstruct_request(args) -> ReconstructRequest:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.prior is not None:
        if args.prior.startswith("remote:"):
            overrides["prior"] = {"kind": "remote",
                                  "address": args.prior[len("remote:"):]}
        else:
            _fail(EXIT_USAGE, "UsageError",
                  f"--prior must look like remote:<host>:<port>, got {args.prior}")
    if overrides:
        cfg = cfg.model_copy(update=overrides)
        cfg = RunConfig.model_validate(cfg.model_dump())
    return ReconstructRequest(meas=args.meas, out_dir=args.out_dir, config=cfg,
                              resume=args.resume)


def cmd_reconstruct(args, server):
    req = _reconstruct_request(args)
    if server:
        handle = _post(server, "/v1/reconstruct",
                       json.loads(req.model_dump_json(by_alias=True)))
        job_id = handle["job_id"]
        last = None
        while True:
            import httpx
            info = httpx.get(f"{server.rstrip('/')}/v1/jobs/{job_id}",
                             timeout=60.0).json()
            if info.get("progress") and info["progress"] != last:
                last = info["progress"]
                if not args.quiet:
                    print(last)
            if info["status"] in ("done", "failed"):
                if info["status"] == "failed":
                    _fail(info.get("exit_code") or EXIT_NUMERICAL, "JobFailed",
                          info.get("error") or "unknown failure")
                print(json.dumps(info["result"]))
                return
            time.sleep(0.3)
    else:
        progress = None if args.quiet else print
        try:
            result = handlers.handle_reconstruct(req, on_progress=progress)
        except Sg3dError as err:
            _fail(err.exit_code, type(err).__name__, str(err))
        print(result.model_dump_json())


def cmd_metrics(args, server):
    req = MetricsRequest(truth=args.truth, recon=args.recon, sd=args.sd,
                         out=args.out, peak=args.peak, subsample=args.subsample)
    payload = _run(server, "/v1/metrics", handlers.handle_metrics, req)
    print(json.dumps(payload))


def cmd_schedule_preview(args, server):
    req = SchedulePreviewRequest(depth=args.depth, batch=args.batch,
                                 coverage=args.coverage, budget=args.budget,
                                 seed=args.seed)
    out = _run(server, "/v1/schedule-preview", handlers.handle_schedule_preview, req)
    print(out["text"] if isinstance(out, dict) else out)


def cmd_baseline(args, server):
    req = BaselineRequest(method=args.method, **{"in": args.in_path}, out=args.out,
                          factor=args.factor, axes=args.axes, weight=args.weight)
    info = _run(server, "/v1/baseline", handlers.handle_baseline, req)
    print(json.dumps(info))


def cmd_serve(args, server):
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port,
                log_level="warning" if args.quiet else "info")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sg3d", description=__doc__)
    p.add_argument("--server", default=os.environ.get("SG3D_SERVER"),
                   help="base URL of a running sg3d service; default in-process")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("phantom", help="generate a synthetic volume")
    sp.add_argument("--spec", help="JSON file of phantom parameters")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dims", help="D,H,W override")
    sp.add_argument("--kind", choices=["layered", "gaussian_field",
                                       "piecewise_constant_z"])
    sp.add_argument("--seed", type=int)
    sp.set_defaults(fn=cmd_phantom)

    sp = sub.add_parser("degrade", help="apply the forward model plus noise")
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--factor", type=int, default=2)
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--axes", default="yx", choices=["yx", "y", "x"])
    sp.set_defaults(fn=cmd_degrade)

    sp = sub.add_parser("reconstruct", help="run the sampling chain")
    sp.add_argument("--meas", required=True)
    sp.add_argument("--config", help="RunConfig JSON file (defaults otherwise)")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--resume", help="checkpoint file to resume from")
    sp.add_argument("--prior", help="prior override, e.g. remote:<host>:<port>")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(fn=cmd_reconstruct)

    sp = sub.add_parser("metrics", help="quality report for a reconstruction")
    sp.add_argument("--truth", required=True)
    sp.add_argument("--recon", required=True)
    sp.add_argument("--sd")
    sp.add_argument("--out")
    sp.add_argument("--peak", type=float)
    sp.add_argument("--subsample", type=int)
    sp.set_defaults(fn=cmd_metrics)

    sp = sub.add_parser("schedule-preview", help="print a cover histogram")
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--batch", type=int, required=True)
    sp.add_argument("--coverage", type=int, default=1)
    sp.add_argument("--budget", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_schedule_preview)

    sp = sub.add_parser("baseline", help="interpolation / TV3D baselines")
    sp.add_argument("--method", required=True,
                    choices=["bilinear", "bicubic", "tv3d"])
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--factor", type=int, default=2)
    sp.add_argument("--axes", default="yx", choices=["yx", "y", "x"])
    sp.add_argument("--weight", type=float, default=0.1)
    sp.set_defaults(fn=cmd_baseline)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8333)
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args, args.server)
    except SystemExit:
        raise
    except Sg3dError as err:
        _fail(err.exit_code, type(err).__name__, str(err))
    except (OSError, json.JSONDecodeError, ValueError) as err:
        _fail(EXIT_DATA, type(err).__name__, str(err))
    return 0


if __name__ == "__main__":
    sys.exit(main())
