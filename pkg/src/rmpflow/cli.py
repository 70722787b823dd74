"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, RmpflowError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

RUN_COMMANDS = {
    "run-1d": "oned",
    "run-2d": "twod",
    "run-arm": "arm",
    "run-invariance": "invariance",
    "run-dyncheck": "dyncheck",
}

log = logging.getLogger("rmpflow")


def _parser():
    p = argparse.ArgumentParser(prog="rmpflow", description="RMP-tree experiments and checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, kind in RUN_COMMANDS.items():
        s = sub.add_parser(cmd, help=f"run a '{kind}' scenario")
        s.add_argument("--config", required=True, help="scenario JSON file")
        s.add_argument("--out", help="output directory (default: the config's 'output')")
        s.add_argument("--seed", type=int, help="override the config seed")
    s = sub.add_parser("validate", help="validate a scenario config")
    s.add_argument("--config", required=True)
    s = sub.add_parser("print-tree", help="print the RMP-tree(s) a config declares")
    s.add_argument("--config", required=True)
    s = sub.add_parser("dump-dyn", help="print root inertia and bias of a dyncheck chain")
    s.add_argument("--config", required=True)
    s.add_argument("--chain", help="chain name (default: first)")
    s.add_argument("--q", type=float, nargs="+", required=True)
    s.add_argument("--qd", type=float, nargs="+")
    return p


def _load(path, kind=None, seed=None):
    from .bench import dump_config, load_config, parse_config

    cfg = load_config(path)
    if kind is not None and cfg.kind != kind:
        raise ConfigError(f"kind: expected '{kind}' for this command, got '{cfg.kind}'")
    if seed is not None:
        data = dump_config(cfg)
        data["seed"] = seed
        cfg = parse_config(data)
    return cfg


def _trees(cfg):
    from .bench.trees import build_tree

    if cfg.kind == "oned":
        from .bench.oned import reference_tree

        yield "reference", reference_tree(cfg.reference)
        for v in cfg.variants:
            yield v.name, build_tree(v.tree)
    elif cfg.kind == "twod":
        for p in cfg.panels:
            yield p.name, build_tree(p.tree)
    elif cfg.kind == "arm":
        from .bench.arm import sample_targets, tree_decl

        goal = sample_targets(cfg)[0]
        env = cfg.environments[0]
        for m in cfg.methods:
            yield f"{m.label} ({env.name}, trial 0)", build_tree(tree_decl(cfg, m, env, goal))
    elif cfg.kind == "invariance":
        from .bench.invariance import build_pair

        tq, tw, _ = build_pair(cfg)
        yield "q", tq
        yield f"warped ({cfg.warp.kind})", tw
    else:
        from .bench.dyncheck import chain_of
        from .rigid import chain_tree

        for c in cfg.chains:
            yield c.name, chain_tree(chain_of(c))


def _cmd_run(args):
    from .bench import runner

    kind = RUN_COMMANDS[args.command]
    cfg = _load(args.config, kind, args.seed)
    out = args.out or cfg.output
    if not out:
        raise ConfigError("output: no --out given and the config has no 'output'")
    fn = runner(kind)
    if kind == "arm":
        result = fn(cfg, progress=lambda r: log.info("%s %s %d: %s", r["method"], r["environment"], r["trial"], r["status"]))
    else:
        result = fn(cfg)
    Path(out).mkdir(parents=True, exist_ok=True)
    result.write(out)
    print(json.dumps({"out": str(out), "summary": _short(result.summary if hasattr(result, "summary") else result.aggregate)}, default=str))
    return EXIT_OK


def _short(obj):
    from .bench.io import jsonable

    return jsonable(obj)


def _cmd_dump(args):
    from .bench.dyncheck import chain_of
    from .rigid import dump_dynamics

    cfg = _load(args.config, "dyncheck")
    decl = cfg.chains[0] if args.chain is None else next((c for c in cfg.chains if c.name == args.chain), None)
    if decl is None:
        raise ConfigError(f"chains: no chain named {args.chain!r}")
    n = len(decl.link_lengths)
    qd = args.qd if args.qd is not None else [0.0] * n
    if len(args.q) != n or len(qd) != n:
        raise ConfigError(f"q/qd must have {n} entries for chain {decl.name!r}")
    print(json.dumps(dump_dynamics(chain_of(decl), np.array(args.q), np.array(qd)), indent=2))
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command in RUN_COMMANDS:
            return _cmd_run(args)
        if args.command == "validate":
            cfg = _load(args.config)
            print(f"ok: {cfg.kind}")
            return EXIT_OK
        if args.command == "print-tree":
            cfg = _load(args.config)
            for name, tree in _trees(cfg):
                print(f"# {name}")
                print(tree.describe())
            return EXIT_OK
        if args.command == "dump-dyn":
            return _cmd_dump(args)
    except ConfigError as e:
        print(f"config error:\n{e}", file=sys.stderr)
        return EXIT_CONFIG
    except (RmpflowError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
