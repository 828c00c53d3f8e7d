"""Seeded Monte Carlo campaigns for the statistical and exact claims.

Each :class:`TrialSpec` binds one claim to a named runner, a seed stream,
and a pass threshold.  Exact claims run per seed with zero tolerance;
statistical claims aggregate a per-seed statistic over the stream and
compare the aggregate to the threshold.  The registry ships with a
coverage table: building it fails unless every public operation of the
package is exercised (directly or through its call graph) by at least one
trial.  Seed streams are disjoint across trials, so campaigns can run in
any order or in parallel without sharing randomness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import oracle
from .bitio import BitReader, BitWriter
from .coloring import (ColoringState, announce_color_hash_setup,
                       multi_trial, slack_generation)
from .dense import build_cliques, select_leader
from .generators import (clique, gnp, palettes_random, palettes_shared_prefix,
                         planted_acd, random_tree, star)
from .hashing import (Backend, derive, ecc_encode, make_color_hash,
                      make_ecc, make_hash, sample_multiset,
                      choose_low_collision_hash, collision_involved_count,
                      color_hash_from_bits)
from .pipeline import PipelineConfig, oracle_suite, run_d1lc, verify_coloring
from .probe import (buddy, compute_acd, detect_c4_wedges, detect_round_cap,
                    detect_triangle_edges, estimate_local_sparsity,
                    estimate_sparsity, NodeRole)
from .runtime import Graph, Network, run_rounds
from .sketch import (SketchParams, collide, estimate_similarity_core,
                     hit, joint_sample_core, restrict,
                     run_edge_joint_sample, run_edge_similarity)

SEED_STRIDE = 1_000_000

_KINDS = ("exact", "statistical")
_DIRECTIONS = (">=", "<=")
_STATISTICS = ("success-rate", "mean")


@dataclass(frozen=True)
class TrialSpec:
    """One claim: a runner, its parameters, a seed stream, a threshold."""

    name: str
    kind: str
    runner: str
    params: tuple[tuple[str, object], ...]
    seeds: int
    seed_base: int
    statistic: str
    threshold: float
    direction: str
    claim_note: str
    exercises: tuple[str, ...]
    pinned: bool = False  # seed count fixed by an external budget

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown trial kind {self.kind!r}")
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.statistic not in _STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if self.seeds < 1:
            raise ValueError("seeds must be positive")
        if self.kind == "statistical" and not self.pinned and self.seeds < 1000:
            raise ValueError(
                f"statistical trial {self.name} needs >= 1000 seeds")
        if self.kind == "exact" and (self.statistic != "success-rate"
                                     or self.threshold != 1.0
                                     or self.direction != ">="):
            raise ValueError("exact trials must demand success-rate == 1.0")

    @property
    def params_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class TrialVerdict:
    name: str
    kind: str
    passed: bool
    measured: float
    threshold: float
    direction: str
    seeds: int
    seed_base: int
    failures: int
    records: tuple = ()


_RUNNERS: dict = {}


def runner(name: str):
    def wrap(fn):
        _RUNNERS[name] = fn
        return fn
    return wrap


def run_trials(spec: TrialSpec) -> TrialVerdict:
    """Execute every seed of one trial and compare the aggregate."""
    fn = _RUNNERS[spec.runner]
    params = spec.params_dict
    values = []
    records = []
    for i in range(spec.seeds):
        out = fn(params, spec.seed_base + i)
        if isinstance(out, tuple):
            out, extra = out
            records.append(extra)
        values.append(float(out))
    measured = sum(values) / len(values)
    if spec.direction == ">=":
        passed = measured >= spec.threshold
    else:
        passed = measured <= spec.threshold
    failures = sum(1 for v in values if v != 1.0)
    if spec.kind == "exact":
        passed = failures == 0
    return TrialVerdict(spec.name, spec.kind, passed, measured,
                        spec.threshold, spec.direction, spec.seeds,
                        spec.seed_base, failures, tuple(records))


def render_report(verdicts) -> str:
    """Plain-text verdict report; seed streams are spelled out so any line
    can be reproduced in isolation."""
    lines = ["trial campaign report", "====================="]
    for v in verdicts:
        word = "PASS" if v.passed else "FAIL"
        hi = v.seed_base + v.seeds - 1
        lines.append(
            f"{word} {v.name} [{v.kind}] measured={v.measured:.6f} "
            f"{v.direction} {v.threshold!r} seeds={v.seeds} "
            f"(seeds {v.seed_base}..{hi})")
    return "\n".join(lines) + "\n"


# -- coverage -----------------------------------------------------------------

CANONICAL_OPS = (
    "hashing.make_hash",
    "hashing.choose_low_collision_hash",
    "hashing.sample_multiset",
    "hashing.ecc_encode",
    "hashing.make_color_hash",
    "sketch.restrict",
    "sketch.collide",
    "sketch.hit",
    "sketch.estimate_similarity_core",
    "sketch.run_edge_similarity",
    "sketch.joint_sample_core",
    "sketch.run_edge_joint_sample",
    "runtime.run_rounds",
    "runtime.NodeCtx.send",
    "runtime.NodeCtx.broadcast",
    "runtime.NodeCtx.edge_shared_seed",
    "probe.estimate_sparsity",
    "probe.estimate_local_sparsity",
    "probe.detect_triangle_edges",
    "probe.detect_c4_wedges",
    "probe.buddy",
    "probe.compute_acd",
    "coloring.announce_color_hash_setup",
    "coloring.try_color",
    "coloring.try_random_color",
    "coloring.slack_generation",
    "coloring.identify_v_start",
    "coloring.multi_trial",
    "coloring.slack_color",
    "dense.chromatic_slack",
    "dense.select_leader",
    "dense.classify_slackability",
    "dense.partition_inliers_outliers",
    "dense.put_aside",
    "dense.synch_color_trial",
    "dense.color_put_aside",
    "pipeline.run_d1lc",
    "pipeline.phase_plan",
    "pipeline.fallback_color",
    "pipeline.verify_coloring",
    "pipeline.oracle_suite",
)


def resolve_op(name: str):
    """Map a dotted op name to the live attribute, or raise AttributeError."""
    import congestcolor
    parts = name.split(".")
    obj = getattr(congestcolor, parts[0])
    for attr in parts[1:]:
        obj = getattr(obj, attr)
    return obj


def coverage_gaps(specs) -> list[str]:
    """Canonical ops not exercised by any spec, plus unresolvable names."""
    covered = set()
    problems = []
    for spec in specs:
        for name in spec.exercises:
            try:
                resolve_op(name)
            except AttributeError:
                problems.append(f"{spec.name}: unknown op {name}")
            covered.add(name)
    problems.extend(f"uncovered op {op}" for op in CANONICAL_OPS
                    if op not in covered)
    return problems


# -- runners ------------------------------------------------------------------

@runner("hash_identities")
def _run_hash_identities(params, seed):
    rng = np.random.default_rng(seed)
    universe = 1 << params["universe_bits"]
    A = set(rng.choice(universe, size=int(rng.integers(1, 41)),
                       replace=False).tolist())
    B = A | set(rng.choice(universe, size=int(rng.integers(0, 41)),
                           replace=False).tolist())
    T = int(rng.integers(1, params["max_out"] + 1))
    l = int(rng.integers(1, T + 1))
    ok = True
    for backend in (Backend.IDEALIZED, Backend.PAIRWISE):
        h = make_hash(backend, params["universe_bits"], T, derive(seed, 9))
        want_r = {x for x in A if h.eval(x) <= l}
        want_c = {x for x in A if h.eval(x) <= l
                  and any(h.eval(y) == h.eval(x) for y in B if y != x)}
        ok = (ok and restrict(A, h, l) == want_r
              and collide(A, h, B, l) == want_c
              and hit(A, h, B, l) == want_r - want_c)
    return ok


@runner("low_collision_search")
def _run_low_collision(params, seed):
    rng = np.random.default_rng(seed)
    S = rng.choice(1 << 16, size=params["set_size"], replace=False)
    spec = choose_low_collision_hash(16, params["out_size"], S,
                                     budget=params["budget"], seed=seed)
    again = choose_low_collision_hash(16, params["out_size"], S,
                                      budget=params["budget"], seed=seed)
    return (collision_involved_count(spec, S) <= params["budget"]
            and spec == again)


@runner("sampler_range")
def _run_sampler_range(params, seed):
    T, t = params["out_size"], params["draws"]
    pos = [int(p) for p in sample_multiset(T, t, seed).positions()]
    replay = [int(p) for p in sample_multiset(T, t, seed).positions()]
    return (len(pos) == t and all(1 <= p <= T for p in pos)
            and pos == replay)


@runner("ecc_min_distance")
def _run_ecc_min_distance(params, seed):
    b = params["msg_bits"]
    code = make_ecc(b)
    wmin = min(bin(ecc_encode(code, m)).count("1") for m in range(1, 1 << b))
    return wmin >= b // 2


@runner("color_hash_wire")
def _run_color_hash_wire(params, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5000))
    d = int(rng.integers(6, 9))
    cs_bits = int(rng.integers(8, 128))
    ch = make_color_hash(cs_bits, n, d, seed)
    if ch.out_bits != max(8, (max(n, 2) ** d - 1).bit_length()):
        return False
    back = color_hash_from_bits(ch.to_bits())
    py_rng = random.Random(seed)
    colors = [py_rng.randrange(1 << cs_bits) for _ in range(16)]
    mask = (1 << ch.out_bits) - 1
    return (ch.to_bits().nbits == ch.wire_bits
            and all(0 <= ch.eval(c) <= mask for c in colors)
            and all(ch.eval(c) == back.eval(c) for c in colors))


def _overlap_sets(rng, size, overlap):
    common = round(overlap * size)
    pool = rng.choice((1 << 16) - 1, size=2 * size - common,
                      replace=False) + 1
    return pool[:size], np.concatenate([pool[:common], pool[size:]])


@runner("similarity_cell")
def _run_similarity_cell(params, seed):
    rng = np.random.default_rng(seed)
    size, eps = params["size"], params["eps"]
    S_u, S_v = _overlap_sets(rng, size, params["overlap"])
    res = estimate_similarity_core(S_u, S_v, eps, params["nu"],
                                   seed=derive(seed, 17), universe_bits=16)
    return abs(res.estimate - round(params["overlap"] * size)) <= eps * size


@runner("joint_sample_cell")
def _run_joint_sample_cell(params, seed):
    rng = np.random.default_rng(seed)
    size, eps = params["size"], params["eps"]
    S_u, S_v = _overlap_sets(rng, size, params["overlap"])
    res = joint_sample_core(S_u, S_v, eps, params["nu"],
                            seed=derive(seed, 23), universe_bits=16, count=1)
    u0, v0 = res.side_u[0], res.side_v[0]
    if u0 is None or u0 != v0:
        return False
    if u0 not in set(S_u.tolist()) or u0 not in set(S_v.tolist()):
        raise RuntimeError("joint sample named an element outside the sets")
    return True


@runner("sketch_wire_parity")
def _run_sketch_wire_parity(params, seed):
    rng = np.random.default_rng(seed)
    n = params["n"]
    g = Graph.from_edge_list(n, [(0, 1)])
    size = params["size"]
    common = size // 2
    pool = (rng.choice(n - 1, size=2 * size - common, replace=False) + 1)
    S_u = pool[:size]
    S_v = np.concatenate([pool[:common], pool[size:]])
    sp = SketchParams()
    net = Network(g, seed, bandwidth_mult=16)
    wire = run_edge_similarity(net, 0, 1, S_u, S_v, 0.2, 0.1, sp, "parity")
    edge_seed = Network(g, seed, bandwidth_mult=16)._edge_seed_value(0, 1, 0)
    local = estimate_similarity_core(S_u, S_v, 0.2, 0.1, seed=edge_seed,
                                     universe_bits=net.id_bits, params=sp)
    net2 = Network(g, seed, bandwidth_mult=16)
    joint = run_edge_joint_sample(net2, 0, 1, S_u, S_v, 0.2, 0.1, 2, sp,
                                  "parity")
    ref = joint_sample_core(S_u, S_v, 0.2, 0.1, edge_seed, net2.id_bits, 2,
                            params=sp)
    return (wire.estimate == local.estimate
            and wire.shared_count == local.shared_count
            and net.stats().max_bits_per_edge_round <= net.bandwidth_bits
            and joint.side_u == ref.side_u and joint.side_v == ref.side_v)


@runner("runtime_echo")
def _run_runtime_echo(params, seed):
    g = gnp(8, 0.5, seed)
    if g.m == 0:
        g = Graph.from_edge_list(2, [(0, 1)])
    tokens = {v: derive(seed, 100 + v) & 0xFFFF for v in range(g.n)}

    def program(ctx):
        if ctx.round == 1:
            w = BitWriter()
            w.put(tokens[ctx.node], 16)
            ctx.broadcast(w.done())
            ctx.state["seeds"] = {int(u): ctx.edge_shared_seed(int(u))
                                  for u in ctx.neighbors}
        elif ctx.round == 2:
            got = {m.src: BitReader(m.payload).take(16) for m in ctx.inbox}
            ctx.state["got"] = got
            for u, tok in got.items():
                w = BitWriter()
                w.put(tok, 16)
                ctx.send(u, w.done())
        else:
            ctx.state["echo"] = {m.src: BitReader(m.payload).take(16)
                                 for m in ctx.inbox}
            ctx.halt()

    def transcript_of():
        net = Network(g, seed, bandwidth_mult=4)
        states = [dict() for _ in range(g.n)]
        run_rounds(net, program, max_rounds=8, states=states)
        return net.stats().transcript_hash, states

    t1, states = transcript_of()
    t2, _ = transcript_of()
    ok = t1 == t2
    for u, v in g.edges.tolist():
        ok = (ok and states[u]["got"].get(v) == tokens[v]
              and states[v]["got"].get(u) == tokens[u]
              and states[u]["echo"].get(v) == tokens[u]
              and states[v]["echo"].get(u) == tokens[v]
              and states[u]["seeds"][v] == states[v]["seeds"][u])
    return ok


@lru_cache(maxsize=None)
def _triangle_gap_instance(delta, eps):
    q_rich = int(np.ceil(eps * delta))
    q_poor = int(eps * delta / 4)
    edges = [(0, i) for i in range(1, delta + 1)]
    edges += [(1, 2 + i) for i in range(q_rich)]
    poor = q_rich + 2
    edges += [(poor, poor + 1 + i) for i in range(q_poor)]
    return Graph.from_edge_list(delta + 1 + q_poor, edges), poor


@lru_cache(maxsize=None)
def _c4_gap_instance(delta, eps):
    q_rich = int(np.ceil(eps * delta))
    q_poor = int(eps * delta / 4)
    edges = [(0, i) for i in range(1, delta + 1)]
    nxt = delta + 1
    for _ in range(q_rich):
        edges += [(1, nxt), (2, nxt)]
        nxt += 1
    for _ in range(q_poor):
        edges += [(3, nxt), (4, nxt)]
        nxt += 1
    return Graph.from_edge_list(nxt, edges)


@runner("probe_promises")
def _run_probe_promises(params, seed):
    eps = params["eps"]
    g_tri, poor = _triangle_gap_instance(params["delta"], eps)
    flags = detect_triangle_edges(Network(g_tri, seed, bandwidth_mult=4),
                                  eps=eps, edges=[(0, 1), (0, poor)])
    ok_tri = flags[(0, 1)] and not flags[(0, poor)]

    g_c4 = _c4_gap_instance(params["delta"], eps)
    flags = detect_c4_wedges(Network(g_c4, seed, bandwidth_mult=4), eps=eps,
                             centers=[0], pairs={0: [(1, 2), (3, 4)]})
    ok_c4 = flags[(0, (1, 2))] and not flags[(0, (3, 4))]

    g = gnp(24, 0.3, seed)
    suite = oracle_suite(g, palettes_random(g, seed))
    delta = max(1, g.max_degree())
    est = estimate_sparsity(Network(g, seed, bandwidth_mult=4), eps=0.25)
    good = sum(1 for v in range(g.n)
               if abs(est[v].value - suite["global_sparsity"][v])
               <= 0.25 * delta)
    ok_sp = good >= 0.9 * g.n

    est = estimate_local_sparsity(Network(g, derive(seed, 3),
                                          bandwidth_mult=4), eps=0.3)
    valid = [v for v in range(g.n) if est[v].valid]
    good = sum(1 for v in valid
               if abs(est[v].value - suite["local_sparsity"][v])
               <= 0.3 * max(1, g.degree(v)))
    ok_lo = not valid or good >= 0.9 * len(valid)
    return ok_tri and ok_c4 and ok_sp and ok_lo


@lru_cache(maxsize=None)
def _k5_palette_pool(seed, size=128, space=160):
    rng = np.random.default_rng(seed)
    return [sorted(int(c) + 1 for c in rng.choice(space, size=size,
                                                  replace=False))
            for _ in range(5)]


_BACKENDS = {"idealized": Backend.IDEALIZED, "uniform": Backend.PAIRWISE}


@runner("multi_trial_cell")
def _run_multi_trial_cell(params, seed):
    backend = _BACKENDS[params["backend"]]
    x = params["x"]
    if params["variant"] == "adversarial":
        pal0 = _k5_palette_pool(derive(seed, 31))[0]
        net = Network(clique(2), seed, bandwidth_mult=16)
        state = ColoringState(net, [list(pal0), [1, 2]])
        announce_color_hash_setup(net, state)
        fixed = pal0[:64]
        res = multi_trial(net, state, x, backend=backend, nodes=[0],
                          fixed_tries={1: fixed})
        if res[0] and state.nodes[0].color in set(fixed):
            raise RuntimeError("adopted a color pinned by the adversary")
        return 0.0 if res[0] else 1.0
    net = Network(clique(5), seed, bandwidth_mult=16)
    state = ColoringState(net, [list(p) for p in
                                _k5_palette_pool(derive(seed, 37))])
    announce_color_hash_setup(net, state)
    res = multi_trial(net, state, x, backend=backend)
    if not (state.proper() and state.list_valid()):
        raise RuntimeError("multi_trial broke properness")
    return sum(1 for ok in res.values() if not ok) / len(res)


@lru_cache(maxsize=None)
def _buddy_pair_instance(d, shared):
    edges = [(0, 1)]
    nxt = 2
    for _ in range(shared):
        edges += [(0, nxt), (1, nxt)]
        nxt += 1
    for _ in range(d - 1 - shared):
        edges.append((0, nxt))
        nxt += 1
        edges.append((1, nxt))
        nxt += 1
    return Graph.from_edge_list(nxt, edges)


@runner("buddy_planted_gap")
def _run_buddy_planted_gap(params, seed):
    delta = params["delta"]
    backend = _BACKENDS[params["backend"]]
    eps = params["eps"]
    cap = detect_round_cap(eps)
    sim = _buddy_pair_instance(delta, delta - 1)
    dis = _buddy_pair_instance(delta, delta // 2)
    net = Network(sim, seed, bandwidth_mult=16)
    hit_sim = buddy(net, eps=eps, backend=backend, edges=[(0, 1)])[(0, 1)]
    rounds_sim = net.stats().rounds_used
    net = Network(dis, derive(seed, 5), bandwidth_mult=16)
    hit_dis = buddy(net, eps=eps, backend=backend, edges=[(0, 1)])[(0, 1)]
    rounds = max(rounds_sim, net.stats().rounds_used)
    if rounds > cap:
        raise RuntimeError(f"buddy used {rounds} rounds, cap {cap}")
    return (bool(hit_sim) and not hit_dis), {"rounds": rounds, "cap": cap}


@runner("acd_planted")
def _run_acd_planted(params, seed):
    g, blocks = planted_acd(params["n_cliques"], params["clique_size"],
                            missing_frac=0.01, n_shell=params["n_shell"],
                            shell_p=0.05, bridges_per_clique=2, seed=seed)
    labels = compute_acd(Network(g, seed, bandwidth_mult=4),
                         eps_acd=0.1, eps_spa=0.1)
    members = set().union(*[set(b) for b in blocks])
    right = sum(1 for v in range(g.n)
                if (labels.role[v] is NodeRole.DENSE) == (v in members))
    role_acc = right / g.n
    agree = 0
    for block in blocks:
        ids = [labels.clique_id.get(v) for v in block]
        named = [c for c in ids if c is not None]
        best = max(set(named), key=named.count) if named else None
        agree += sum(1 for c in ids if c is not None and c == best)
    mem_acc = agree / sum(len(b) for b in blocks)
    return role_acc, {"membership": mem_acc}


@lru_cache(maxsize=None)
def _leader_quality_instance():
    """A 40-clique where 37 members share a palette and 3 carry palettes
    disjoint from everything else; the 3 see the whole clique as
    discrepancy, so a leader landing there would be badly unslackful."""
    g = clique(40)
    shared = list(range(1, 42))
    palettes = [list(shared) for _ in range(37)]
    palettes += [list(range(1000 + 50 * i, 1041 + 50 * i)) for i in range(3)]
    clique_of = {v: 0 for v in range(40)}
    sigma_c = oracle.clique_slackability(g, palettes, list(range(40)))
    sigma = [oracle.slackability(g, palettes, v) for v in range(40)]
    if max(sigma) <= 6 * sigma_c:
        raise RuntimeError("leader-quality instance is vacuous")
    return g, palettes, clique_of, sigma, sigma_c


@runner("leader_quality")
def _run_leader_quality(params, seed):
    g, palettes, clique_of, sigma, sigma_c = _leader_quality_instance()
    net = Network(g, seed, bandwidth_mult=4)
    state = ColoringState(net, palettes)
    announce_color_hash_setup(net, state)
    slack_generation(net, state, p_gen=0.25)
    cliques = build_cliques(net, clique_of)
    select_leader(net, state, cliques.values(), clique_of)
    lead = cliques[0].leader
    return sigma[lead] <= 6 * sigma_c


@runner("pipeline_determinism")
def _run_pipeline_determinism(params, seed):
    g = gnp(params["n"], params["p"], seed)
    palettes = palettes_random(g, seed)
    outs = []
    for _ in range(2):
        net = Network(g, seed, bandwidth_mult=1)
        coloring, stats = run_d1lc(net, palettes)
        outs.append((coloring, stats.transcript_hash, stats.rounds_used))
    return outs[0] == outs[1] and verify_coloring(g, palettes, outs[0][0]).ok


# pipeline corpus: families cycle with the instance index; sizes climb
# within each family, and the last few instances are the large ones
_GNP_N = (50, 70, 90, 120, 160, 220, 300, 400)
_GNP_DEG = (8, 16, 24)
_BLOCK_SIZES = (12, 20, 30, 45)
_STAR_N = (40, 90, 200, 600, 1500)
_TREE_N = (40, 100, 250, 700, 1600)
_ACD_SHAPES = ((3, 25, 30), (4, 35, 50), (2, 45, 25), (3, 30, 60))


def corpus_instance(index: int, seed: int):
    """Instance ``index`` of the totality corpus: (graph, palettes, config
    overrides, meta).  Spread palettes keep large instances fallback-light;
    tight shared-prefix palettes appear on the small and medium ones."""
    overrides = {}
    if index >= 195:
        jumbo = [("gnp", 1200, 32), ("star", 4000, 0), ("tree", 4000, 0),
                 ("gnp", 2000, 64), ("acd", 0, 0)][index - 195]
        family, a, b = jumbo
        if family == "gnp":
            g = gnp(a, min(1.0, b / a), seed)
            palettes = palettes_random(g, seed)
        elif family == "star":
            g = star(a)
            palettes = palettes_shared_prefix(g)
        elif family == "tree":
            g = random_tree(a, seed)
            palettes = palettes_random(g, seed)
        else:
            g, _ = planted_acd(4, 45, 0.01, 120, 0.04, 2, seed)
            palettes = palettes_random(g, seed)
        return g, palettes, overrides, {"family": family, "n": g.n}
    j = index // 5
    kind = index % 5
    if kind == 0:
        n = _GNP_N[j % len(_GNP_N)]
        deg = _GNP_DEG[j % len(_GNP_DEG)]
        g = gnp(n, min(1.0, deg / n), seed)
        palettes = palettes_random(g, seed)
        family = "gnp"
    elif kind == 1:
        size = _BLOCK_SIZES[j % len(_BLOCK_SIZES)]
        blocks = 2 + j % 3
        edges = []
        for b in range(blocks):
            base = b * size
            edges += [(base + u, base + v) for u in range(size)
                      for v in range(u + 1, size)]
        g = Graph.from_edge_list(blocks * size, edges)
        palettes = (palettes_shared_prefix(g, extra=6) if j % 2
                    else palettes_random(g, seed))
        family = "clique-union"
    elif kind == 2:
        g = star(_STAR_N[j % len(_STAR_N)])
        palettes = palettes_shared_prefix(g)
        family = "star"
    elif kind == 3:
        g = random_tree(_TREE_N[j % len(_TREE_N)], seed)
        palettes = palettes_random(g, seed)
        family = "tree"
    else:
        nc, sz, shell = _ACD_SHAPES[j % len(_ACD_SHAPES)]
        g, _ = planted_acd(nc, sz, 0.01, shell, 0.06, 2, seed)
        palettes = (palettes_shared_prefix(g, extra=8) if j % 2
                    else palettes_random(g, seed))
        if j % 2:
            overrides["fallback_cap_override"] = g.n
        family = "planted-acd"
    return g, palettes, overrides, {"family": family, "n": g.n}


@runner("pipeline_totality")
def _run_pipeline_totality(params, seed):
    index = seed - params["origin"]
    g, palettes, overrides, meta = corpus_instance(index, seed)
    config = PipelineConfig(master_seed=seed, **overrides)
    net = Network(g, seed, bandwidth_mult=config.bandwidth_mult)
    coloring, stats = run_d1lc(net, palettes, config)
    report = verify_coloring(g, palettes, coloring)
    meta.update(max_bits=stats.max_bits_per_edge_round,
                bandwidth=net.bandwidth_bits,
                rounds=stats.rounds_used,
                fallback_rounds=stats.phase_rounds.get("fallback", 0))
    return report.ok and stats.max_bits_per_edge_round <= net.bandwidth_bits, meta


# -- registry -----------------------------------------------------------------

def _spec(name, kind, runner_name, params, seeds, statistic, threshold,
          direction, note, exercises, pinned=False):
    return dict(name=name, kind=kind, runner=runner_name,
                params=tuple(sorted(params.items())), seeds=seeds,
                statistic=statistic, threshold=threshold,
                direction=direction, claim_note=note,
                exercises=tuple(exercises), pinned=pinned)


def _registry_entries():
    entries = [
        _spec("hash-identities", "exact", "hash_identities",
              {"universe_bits": 8, "max_out": 16}, 200, "success-rate", 1.0,
              ">=",
              "restrict/collide/hit match brute-force set algebra on random "
              "triples over an 8-bit universe, both hash backends",
              ["hashing.make_hash", "sketch.restrict", "sketch.collide",
               "sketch.hit"]),
        _spec("low-collision-search", "exact", "low_collision_search",
              {"set_size": 40, "out_size": 160, "budget": 10}, 64,
              "success-rate", 1.0, ">=",
              "the searched hash involves at most `budget` elements in "
              "collisions and the search is deterministic per seed",
              ["hashing.choose_low_collision_hash"]),
        _spec("sampler-range", "exact", "sampler_range",
              {"out_size": 64, "draws": 24}, 64, "success-rate", 1.0, ">=",
              "sampled positions stay in [1, T], keep their count, and "
              "replay identically from the seed",
              ["hashing.sample_multiset"]),
    ]
    for b in (8, 12, 16):
        entries.append(_spec(
            f"ecc-min-distance-b{b}", "exact", "ecc_min_distance",
            {"msg_bits": b}, 1, "success-rate", 1.0, ">=",
            f"exhaustive minimum codeword weight of the {b}-bit code is at "
            f"least {b // 2}",
            ["hashing.ecc_encode"]))
    entries.append(_spec(
        "color-hash-wire", "exact", "color_hash_wire", {}, 64,
        "success-rate", 1.0, ">=",
        "color hashes use the pinned output width, stay in range, and "
        "survive the wire encoding round trip",
        ["hashing.make_color_hash"]))
    for eps in (0.1, 0.2, 0.3):
        for size in (50, 200, 1000):
            for overlap in (0.0, 0.25, 0.5, 1.0):
                entries.append(_spec(
                    f"similarity-eps{eps}-n{size}-ov{overlap}",
                    "statistical", "similarity_cell",
                    {"eps": eps, "size": size, "overlap": overlap,
                     "nu": 0.05},
                    2000, "success-rate", 0.9, ">=",
                    "intersection estimate lands within eps*max(|Su|,|Sv|) "
                    "of the exact overlap",
                    ["sketch.estimate_similarity_core"]))
                if overlap >= eps:
                    entries.append(_spec(
                        f"joint-sample-eps{eps}-n{size}-ov{overlap}",
                        "statistical", "joint_sample_cell",
                        {"eps": eps, "size": size, "overlap": overlap,
                         "nu": 0.05},
                        2000, "success-rate",
                        round(1 - 5 * eps / 4 - 0.1, 6), ">=",
                        "both endpoints name the same element of the "
                        "intersection",
                        ["sketch.joint_sample_core"]))
    entries += [
        _spec("sketch-wire-parity", "exact", "sketch_wire_parity",
              {"size": 24, "n": 64}, 40, "success-rate", 1.0, ">=",
              "the two-endpoint protocol reproduces the local estimator "
              "under the edge's joint seed",
              ["sketch.run_edge_similarity", "sketch.run_edge_joint_sample"]),
        _spec("runtime-echo", "exact", "runtime_echo", {}, 64,
              "success-rate", 1.0, ">=",
              "broadcast and directed replies deliver exact payloads, edge "
              "seeds agree across endpoints, and reruns keep the transcript",
              ["runtime.run_rounds", "runtime.NodeCtx.send",
               "runtime.NodeCtx.broadcast",
               "runtime.NodeCtx.edge_shared_seed"]),
        _spec("probe-promises", "statistical", "probe_promises",
              {"delta": 40, "eps": 0.2}, 1000, "success-rate", 0.8, ">=",
              "per seed, the planted triangle and 4-cycle gaps are called "
              "correctly and at least 90% of sparsity estimates sit inside "
              "their additive windows (1 - 2*nu at nu = 0.1)",
              ["probe.detect_triangle_edges", "probe.detect_c4_wedges",
               "probe.estimate_sparsity", "probe.estimate_local_sparsity",
               "pipeline.oracle_suite"]),
    ]
    for backend in ("idealized", "uniform"):
        for x in (1, 2, 4, 8, 16):
            entries.append(_spec(
                f"multi-trial-{backend}-x{x}", "statistical",
                "multi_trial_cell",
                {"backend": backend, "x": x, "variant": "random"},
                1000, "mean", round((7 / 8) ** x + 0.05, 6), "<=",
                "per-node failure rate of an x-shot trial under the slack "
                "precondition (5 node trials per seed)",
                ["coloring.multi_trial",
                 "coloring.announce_color_hash_setup"]))
            entries.append(_spec(
                f"multi-trial-adversarial-{backend}-x{x}", "statistical",
                "multi_trial_cell",
                {"backend": backend, "x": x, "variant": "adversarial"},
                2000, "mean", round((7 / 8) ** x + 0.05, 6), "<=",
                "failure rate with a neighbor pinning half the palette "
                "through a fixed transcript",
                ["coloring.multi_trial"]))
    for delta in (50, 200):
        for backend in ("idealized", "uniform"):
            entries.append(_spec(
                f"buddy-planted-d{delta}-{backend}", "statistical",
                "buddy_planted_gap",
                {"delta": delta, "backend": backend, "eps": 0.1},
                1000, "success-rate", 0.99, ">=",
                "the full-overlap pair is flagged and the half-overlap pair "
                "rejected, within the size-free round cap",
                ["probe.buddy"]))
    entries += [
        _spec("acd-planted", "statistical", "acd_planted",
              {"n_cliques": 4, "clique_size": 40, "n_shell": 60}, 100,
              "mean", 0.99, ">=",
              "mean per-seed role accuracy on planted decompositions; each "
              "record carries the block-membership accuracy",
              ["probe.compute_acd"], pinned=True),
        _spec("leader-quality", "statistical", "leader_quality", {}, 500,
              "success-rate", 0.95, ">=",
              "the elected leader's slackability stays within 6x the "
              "clique average on a clique with a planted unslackful group",
              ["dense.select_leader", "dense.chromatic_slack"], pinned=True),
        _spec("pipeline-determinism", "exact", "pipeline_determinism",
              {"n": 60, "p": 0.2}, 20, "success-rate", 1.0, ">=",
              "rerunning the full pipeline from one master seed reproduces "
              "the coloring, the round count, and the transcript hash",
              ["pipeline.run_d1lc"]),
        _spec("pipeline-totality", "exact", "pipeline_totality",
              {"origin": 0}, 200, "success-rate", 1.0, ">=",
              "every corpus instance (clique unions, random graphs, stars, "
              "trees, planted decompositions) ends complete, proper, "
              "list-valid, and within the bandwidth budget",
              ["pipeline.run_d1lc", "pipeline.phase_plan",
               "pipeline.fallback_color", "pipeline.verify_coloring",
               "probe.compute_acd", "coloring.announce_color_hash_setup",
               "coloring.try_color", "coloring.try_random_color",
               "coloring.slack_generation", "coloring.identify_v_start",
               "coloring.multi_trial", "coloring.slack_color",
               "dense.chromatic_slack", "dense.select_leader",
               "dense.classify_slackability",
               "dense.partition_inliers_outliers", "dense.put_aside",
               "dense.synch_color_trial", "dense.color_put_aside"]),
    ]
    return entries


@lru_cache(maxsize=1)
def registry() -> tuple[TrialSpec, ...]:
    """All trials, with disjoint seed streams; fails on coverage gaps."""
    specs = []
    for idx, entry in enumerate(_registry_entries()):
        base = idx * SEED_STRIDE
        params = dict(entry["params"])
        if "origin" in params:
            params["origin"] = base
        entry["params"] = tuple(sorted(params.items()))
        specs.append(TrialSpec(seed_base=base, **entry))
    if len({s.name for s in specs}) != len(specs):
        raise RuntimeError("duplicate trial names in the registry")
    unknown = [s.name for s in specs if s.runner not in _RUNNERS]
    if unknown:
        raise RuntimeError(f"trials without runners: {unknown}")
    gaps = coverage_gaps(specs)
    if gaps:
        raise RuntimeError("coverage gaps: " + "; ".join(gaps))
    return tuple(specs)


def get_trial(name: str) -> TrialSpec:
    for spec in registry():
        if spec.name == name:
            return spec
    raise KeyError(f"no trial named {name!r}")


# -- manifest -----------------------------------------------------------------

def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_manifest(specs, path: str) -> None:
    """One stanza per trial, flat key = value lines."""
    lines = []
    for spec in specs:
        lines.append(f"[trial {spec.name}]")
        lines.append(f"kind = {spec.kind}")
        lines.append(f"runner = {spec.runner}")
        lines.append(f"seeds = {spec.seeds}")
        lines.append(f"seed_base = {spec.seed_base}")
        lines.append(f"statistic = {spec.statistic}")
        lines.append(f"threshold = {_format_value(spec.threshold)}")
        lines.append(f"direction = {spec.direction}")
        lines.append(f"pinned = {_format_value(spec.pinned)}")
        lines.append(f"claim = {spec.claim_note}")
        lines.append(f"exercises = {', '.join(spec.exercises)}")
        for key, value in spec.params:
            lines.append(f"param.{key} = {_format_value(value)}")
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def parse_manifest(path: str) -> tuple[TrialSpec, ...]:
    specs = []
    fields = None

    def flush():
        if fields is None:
            return
        params = tuple(sorted(fields.pop("params").items()))
        specs.append(TrialSpec(
            name=fields["name"], kind=fields["kind"],
            runner=fields["runner"], params=params,
            seeds=int(fields["seeds"]), seed_base=int(fields["seed_base"]),
            statistic=fields["statistic"],
            threshold=float(fields["threshold"]),
            direction=fields["direction"], claim_note=fields["claim"],
            exercises=tuple(fields["exercises"].split(", ")),
            pinned=fields["pinned"] == "true"))

    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("[trial "):
                flush()
                fields = {"name": line[len("[trial "):-1], "params": {}}
                continue
            key, _, value = line.partition(" = ")
            if key.startswith("param."):
                fields["params"][key[len("param."):]] = _parse_value(value)
            else:
                fields[key] = value
    flush()
    return tuple(specs)
