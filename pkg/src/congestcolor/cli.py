"""Command-line front end.

Subcommands: ``run`` (full coloring pipeline), ``probe`` (distributed
structure probes), ``oracle`` (exact centralized quantities), ``gen``
(graph and palette generation), ``bench`` (seeded trial campaigns).
Reports are flat structured text, one record per line; config files are
flat ``key = value`` stanzas matching the pipeline config fields.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from . import generators, trials
from .hashing import Backend
from .pipeline import (BACKENDS, PipelineConfig, non_fallback_rounds,
                       oracle_suite, run_d1lc, verify_coloring)
from .probe import (compute_acd, detect_c4_wedges, detect_triangle_edges,
                    estimate_local_sparsity, estimate_sparsity, buddy)
from .runtime import Graph, Network, load_palettes, save_palettes


def parse_config_file(path: str) -> dict:
    """Flat key = value lines; '#' starts a comment; types follow the
    pipeline config fields."""
    allowed = {f.name: f.type for f in fields(PipelineConfig)}
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key or not value:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            if key not in allowed:
                raise ValueError(f"{path}:{lineno}: unknown config key {key}")
            out[key] = _coerce(value)
    return out


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _flag(value: bool) -> str:
    return "true" if value else "false"


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _net_of(args, g: Graph) -> Network:
    return Network(g, args.seed, bandwidth_mult=args.mult)


def _cmd_run(args) -> int:
    g = Graph.load(args.graph)
    palettes = load_palettes(args.palettes, g.n)
    overrides = parse_config_file(args.config) if args.config else {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.backend:
        overrides["backend"] = args.backend
    config = PipelineConfig(**overrides)
    net = Network(g, config.master_seed,
                  bandwidth_mult=config.bandwidth_mult)
    coloring, stats = run_d1lc(net, palettes, config)
    report = verify_coloring(g, palettes, coloring)
    print(f"n {g.n}")
    print(f"m {g.m}")
    print(f"complete {_flag(report.complete)}")
    print(f"proper {_flag(report.proper)}")
    print(f"list-valid {_flag(report.list_valid)}")
    print(f"rounds {stats.rounds_used}")
    print(f"non-fallback-rounds {non_fallback_rounds(stats)}")
    print(f"total-messages {stats.total_messages}")
    print(f"total-bits {stats.total_bits}")
    print(f"max-bits-per-edge-round {stats.max_bits_per_edge_round}")
    print(f"bandwidth-bits {net.bandwidth_bits}")
    print(f"transcript {stats.transcript_hash}")
    for v in range(g.n):
        print(f"color {v} {coloring[v]}")
    if args.out:
        with open(args.out, "w") as fh:
            for v in range(g.n):
                fh.write(f"{v} {coloring[v]}\n")
    return 0 if report.ok else 1


def _cmd_probe(args) -> int:
    g = Graph.load(args.graph)
    backend = BACKENDS[args.backend or "idealized"]
    if args.eps is None:
        args.eps = 0.1 if args.op == "buddy" else 0.2
    if args.op == "sparsity":
        for v, est in sorted(estimate_sparsity(_net_of(args, g),
                                               eps=args.eps).items()):
            print(f"{v} {_fmt(est.value)}")
    elif args.op == "local-sparsity":
        for v, est in sorted(estimate_local_sparsity(_net_of(args, g),
                                                     eps=args.eps).items()):
            tag = "" if est.valid else " invalid"
            print(f"{v} {_fmt(est.value)}{tag}")
    elif args.op == "triangles":
        flags = detect_triangle_edges(_net_of(args, g), eps=args.eps)
        for (u, v), flag in sorted(flags.items()):
            print(f"{u} {v} {_flag(flag)}")
    elif args.op == "c4":
        flags = detect_c4_wedges(_net_of(args, g), eps=args.eps)
        for (v, (a, b)), flag in sorted(flags.items()):
            print(f"{v} {a} {b} {_flag(flag)}")
    elif args.op == "buddy":
        flags = buddy(_net_of(args, g), eps=args.eps, backend=backend)
        for (u, v), flag in sorted(flags.items()):
            print(f"{u} {v} {_flag(flag)}")
    else:
        labels = compute_acd(_net_of(args, g), eps_acd=args.eps_acd,
                             eps_spa=args.eps_spa, backend=backend)
        for v in range(g.n):
            cid = labels.clique_id.get(v, "-")
            print(f"{v} {labels.role[v].name.lower()} {cid}")
    return 0


def _cmd_oracle(args) -> int:
    g = Graph.load(args.graph)
    palettes = load_palettes(args.palettes, g.n)
    suite = oracle_suite(g, palettes)
    node_keys = ("global_sparsity", "local_sparsity", "discrepancy",
                 "unevenness", "slackability", "c4_through_node")
    for key in node_keys:
        label = key.replace("_", "-")
        for v in range(g.n):
            print(f"{label} {v} {_fmt(suite[key][v])}")
    for (u, v), count in sorted(suite["triangles_per_edge"].items()):
        print(f"triangles {u} {v} {count}")
    for (u, v), value in sorted(suite["disparity"].items()):
        print(f"disparity {u} {v} {_fmt(value)}")
    return 0


def _cmd_gen(args) -> int:
    seed = args.seed
    if args.family == "gnp":
        g = generators.gnp(args.n, args.p, seed)
    elif args.family == "star":
        g = generators.star(args.n)
    elif args.family == "tree":
        g = generators.random_tree(args.n, seed)
    elif args.family == "power-law":
        g = generators.power_law(args.n, args.exponent, args.avg_degree,
                                 seed)
    elif args.family == "clique-union":
        g, _ = generators.disjoint_cliques([args.block_size] * args.blocks)
    else:
        g, _ = generators.planted_acd(args.blocks, args.block_size,
                                      args.missing_frac, args.shell,
                                      args.shell_p, args.bridges, seed)
    if args.palette == "shared":
        palettes = generators.palettes_shared_prefix(g, extra=args.extra)
    else:
        palettes = generators.palettes_random(g, seed, spread=args.spread,
                                              extra=args.extra)
    graph_path = args.out + ".graph"
    palette_path = args.out + ".palettes"
    g.save(graph_path)
    save_palettes(palette_path, palettes)
    print(f"graph {graph_path}")
    print(f"palettes {palette_path}")
    print(f"n {g.n}")
    print(f"m {g.m}")
    return 0


def _cmd_bench(args) -> int:
    registry = trials.registry()
    if args.list:
        for spec in registry:
            print(f"{spec.name} {spec.kind} seeds={spec.seeds} "
                  f"{spec.direction} {spec.threshold!r}")
        return 0
    if args.manifest:
        trials.write_manifest(registry, args.manifest)
        print(f"manifest {args.manifest}")
        print(f"trials {len(registry)}")
        return 0
    if args.all:
        chosen = list(registry)
    else:
        chosen = [trials.get_trial(name) for name in args.trial]
    verdicts = [trials.run_trials(spec) for spec in chosen]
    text = trials.render_report(verdicts)
    print(text, end="")
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    return 0 if all(v.passed for v in verdicts) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="congestcolor",
        description="Bandwidth-limited distributed list coloring toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="color a graph end to end")
    p.add_argument("--graph", required=True, help="edge list file (n m header)")
    p.add_argument("--palettes", required=True, help="'v c1 c2 ...' lines")
    p.add_argument("--config", help="flat key = value pipeline config")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--backend", choices=sorted(BACKENDS))
    p.add_argument("--out", help="write 'v color' lines here")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("probe", help="run one distributed structure probe")
    p.add_argument("op", choices=["sparsity", "local-sparsity", "triangles",
                                  "c4", "buddy", "acd"])
    p.add_argument("--graph", required=True)
    p.add_argument("--eps", type=float, default=None,
                   help="probe accuracy (default 0.2; buddy 0.1)")
    p.add_argument("--eps-acd", type=float, default=0.1)
    p.add_argument("--eps-spa", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mult", type=int, default=4,
                   help="bandwidth multiplier")
    p.add_argument("--backend", choices=sorted(BACKENDS))
    p.set_defaults(fn=_cmd_probe)

    p = sub.add_parser("oracle", help="exact structure suite (desk scale)")
    p.add_argument("--graph", required=True)
    p.add_argument("--palettes", required=True)
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("gen", help="generate a graph and palette pair")
    p.add_argument("family", choices=["gnp", "clique-union", "star", "tree",
                                      "power-law", "planted-acd"])
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--exponent", type=float, default=2.5)
    p.add_argument("--avg-degree", type=float, default=8.0)
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--block-size", type=int, default=20)
    p.add_argument("--missing-frac", type=float, default=0.01)
    p.add_argument("--shell", type=int, default=40)
    p.add_argument("--shell-p", type=float, default=0.05)
    p.add_argument("--bridges", type=int, default=2)
    p.add_argument("--palette", choices=["random", "shared"],
                   default="random")
    p.add_argument("--spread", type=int, default=4)
    p.add_argument("--extra", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("bench", help="run seeded trial campaigns")
    p.add_argument("--list", action="store_true", help="list trials")
    p.add_argument("--manifest", help="write the trial manifest and exit")
    p.add_argument("--trial", action="append", default=[],
                   help="trial name (repeatable)")
    p.add_argument("--all", action="store_true", help="run every trial")
    p.add_argument("--report", help="also write the report here")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if (args.command == "bench" and not args.list and not args.manifest
            and not args.all and not args.trial):
        build_parser().error("bench needs --list, --manifest, --trial, "
                             "or --all")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
