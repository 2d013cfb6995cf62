"""Command-line entry points: run, serve, build-network.

Exit codes: 0 ok, 2 config error, 3 network build error, 4 runtime
invariant violation.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, NetworkBuildError, SimulationInvariantError


def _read_config(path: str, seed: int | None):
    with open(path, "r", encoding="utf-8") as f:
        config = load_config(f.read())
    if seed is not None:
        config.sim.seed = seed
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="urbanflow",
                                     description="deterministic urban traffic microsimulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="headless run, metrics to --out")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", default=None)
    run_p.add_argument("--tables", default=None, help="next-hop table cache file")

    serve_p = sub.add_parser("serve", help="live-steering service")
    serve_p.add_argument("--config", required=True)
    serve_p.add_argument("--port", type=int, required=True)
    serve_p.add_argument("--tables", default=None)
    serve_p.add_argument("--ui", default=None, help="static UI asset directory")

    build_p = sub.add_parser("build-network", help="prebuild next-hop tables")
    build_p.add_argument("--config", required=True)
    build_p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            from .runner import run_headless

            config = _read_config(args.config, args.seed)
            world, summary = run_headless(config, args.out, args.tables)
            print(f"ticks={world.tick_index} in_world={len(world.vehicles)} "
                  f"arrivals={world.arrivals} world_hash={summary['world_hash']}")
            return 0
        if args.command == "serve":
            from .server import serve

            config = _read_config(args.config, None)
            serve(config, args.port, args.tables, args.ui)
            return 0
        if args.command == "build-network":
            from .runner import build_network, load_or_build_tables

            config = _read_config(args.config, None)
            graph = build_network(config)
            load_or_build_tables(graph, args.out)
            print(f"edges={len(graph.edges)} vertices={len(graph.vertices)} tables={args.out}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NetworkBuildError as exc:
        print(f"network build error: {exc}", file=sys.stderr)
        return 3
    except SimulationInvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
