"""CLI: run a prior server.

    prior-bridge serve --port 9700 --prior gaussian:0.3,4.0
    prior-bridge serve --prior mixture:0.5:0.2:0.05,0.5:0.8:0.05

The bind address may also come from PRIOR_BRIDGE_BIND (host:port).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .priors import make_prior
from .server import PriorServer


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="prior-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("serve", help="answer PDP1 prior requests")
    default_bind = os.environ.get("PRIOR_BRIDGE_BIND", "127.0.0.1:0")
    sp.add_argument("--host", default=None)
    sp.add_argument("--port", type=int, default=None)
    sp.add_argument("--prior", default="gaussian:0.0,1.0",
                    help="gaussian:<mean>,<precision> or mixture:w:m:tau[,...]")
    sp.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    env_host, _, env_port = default_bind.rpartition(":")
    host = args.host if args.host is not None else (env_host or "127.0.0.1")
    port = args.port if args.port is not None else int(env_port or 0)
    try:
        prior = make_prior(args.prior)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    server = PriorServer(prior, host=host, port=port)
    print(f"listening on {server.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
