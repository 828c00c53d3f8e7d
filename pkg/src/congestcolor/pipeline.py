"""Full list-coloring pipeline: phase scheduling over degree ranges, the
sparse and dense paths, and the gather-and-greedy fallback.

The post-shattering finisher used here is deliberately simple: leftover
uncolored components elect a root by flooding, stream their palettes (as
hashes under one reference function) and adjacency up a BFS tree, and the
root colors them greedily.  This replaces the deterministic decomposition
stack the asymptotic analysis imports; it changes worst-case round bounds,
not correctness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import oracle
from .bitio import BitWriter
from .coloring import (KIND_CONTROL, ColoringState, _apply_adoptions,
                       announce_color_hash_setup, identify_v_start, log_star,
                       slack_color, slack_generation)
from .dense import (DenseParams, build_cliques, classify_slackability,
                    color_put_aside, partition_inliers_outliers, put_aside,
                    select_leader, synch_color_trial)
from .hashing import Backend
from .probe import NodeRole, compute_acd
from .runtime import Network

BACKENDS = {"idealized": Backend.IDEALIZED, "uniform": Backend.PAIRWISE}


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable constant of the algorithm in one place."""

    eps_acd: float = 0.1
    eps_spa: float = 0.1
    eps_hat: float = 0.01
    p_gen: float = 0.1
    kappa: float = 0.25
    c_class: float = 4.0
    c_pa: float = 2.0
    bandwidth_mult: int = 1
    backend: str = "idealized"
    floor: int = 64
    fallback_cap_mult: float = 10.0
    fallback_cap_override: int | None = None
    master_seed: int = 0
    ell_override: int | None = None
    try_rounds: int = 3
    universal_d: int = 6
    round_envelope: int = 200

    def __post_init__(self):
        for name in ("eps_acd", "eps_spa", "eps_hat"):
            val = getattr(self, name)
            if not 0 < val <= 1 / 6:
                raise ValueError(f"{name} must be in (0, 1/6]")
        if not 0 < self.p_gen <= 1:
            raise ValueError("p_gen must be in (0, 1]")
        if self.floor < 8:
            raise ValueError("floor must be at least 8")
        if not 1 / self.s_min < self.kappa <= 1:
            raise ValueError("kappa must be in (1/s_min, 1]")
        if self.backend not in BACKENDS:
            raise ValueError("backend must be 'idealized' or 'uniform'")
        if self.bandwidth_mult < 1:
            raise ValueError("bandwidth_mult must be at least 1")

    @property
    def s_min(self) -> int:
        """Per-phase slack floor handed to the slack-coloring stage."""
        return max(2, self.floor // 4)

    def fallback_cap(self, n: int) -> int:
        if self.fallback_cap_override is not None:
            return self.fallback_cap_override
        return int(self.fallback_cap_mult
                   * max(1.0, math.log2(max(n, 2))) ** 2)


@dataclass(frozen=True)
class PhasePlan:
    """Degree ranges processed high to low.  Each entry (lo, hi) covers
    degrees in (lo, hi]; the final entry has lo = 0 and is the residue."""

    ranges: tuple
    floor: int

    def __len__(self) -> int:
        return len(self.ranges)

    def covers(self, degree: int) -> bool:
        return any(lo < degree <= hi or (lo == 0 and degree == 0)
                   for lo, hi in self.ranges)


def phase_plan(n: int, delta: int, floor: int = 64) -> PhasePlan:
    """Iterate x -> max(ceil(log2(x)^7), floor), jumping straight to the
    floor once the map stops halving (at desk scale: immediately)."""
    if floor < 2:
        raise ValueError("floor must be at least 2")
    x = max(int(delta), 1)
    ranges = []
    while x > floor:
        lo = max(math.ceil(math.log2(x) ** 7), floor)
        if lo >= max(x // 2, floor + 1):
            lo = floor
        ranges.append((lo, x))
        x = lo
    ranges.append((0, x))
    return PhasePlan(tuple(ranges), floor)


def run_d1lc(net: Network, palettes, config: PipelineConfig | None = None):
    """Color the whole network; returns (coloring dict, RoundStats).

    Each degree range runs: almost-clique decomposition; dense-clique
    structure (leaders, classes, outliers); one joint slack generation;
    start-set identification; put-aside sampling; then slack coloring of
    the start set, the remaining sparse nodes, the outliers, the clique
    cores around a synchronized trial, and finally the put-aside relays.
    Whatever survives every phase is finished by the fallback.
    """
    config = config or PipelineConfig()
    state = ColoringState(net, palettes)
    announce_color_hash_setup(net, state, d=config.universal_d)
    g = net.graph
    plan = phase_plan(g.n, g.max_degree(), config.floor)
    backend = BACKENDS[config.backend]
    dparams = DenseParams(config.c_class, config.c_pa, config.ell_override)

    def run_slack(nodes, phase):
        live = sorted(v for v in nodes if state.nodes[v].color is None)
        if live:
            slack_color(net, state, live, config.s_min, config.kappa,
                        backend=backend, try_rounds=config.try_rounds,
                        phase=phase)

    for lo, hi in plan.ranges:
        def in_phase(deg):
            return lo < deg <= hi or (lo == 0 and deg == 0)

        in_range = [v for v in state.uncolored() if in_phase(g.degree(v))]
        if not in_range:
            continue
        labels = compute_acd(net, config.eps_acd, config.eps_spa, backend)

        # a clique joins the phase of its largest member degree
        phase_cliques = {
            cid: mem for cid, mem in labels.cliques().items()
            if in_phase(max(g.degree(v) for v in mem))
            and any(state.nodes[v].color is None for v in mem)}
        clique_of = {v: cid for cid, mem in phase_cliques.items()
                     for v in mem}
        sparse_like = {v for v in in_range
                       if labels.role.get(v) is not NodeRole.DENSE}

        cliques = {}
        if clique_of:
            cliques = build_cliques(net, clique_of, dparams)
            select_leader(net, state, cliques.values(), clique_of)
            classify_slackability(net, state, cliques.values(), clique_of,
                                  dparams)
            partition_inliers_outliers(net, state, cliques.values())

        participants = sorted(set(in_range) | set(clique_of))
        slack_generation(net, state, participants=participants,
                         p_gen=config.p_gen)
        v_start, bad = identify_v_start(net, state, eps_hat=config.eps_hat)

        if cliques:
            put_aside(net, state, cliques.values(), clique_of, dparams)

        run_slack(v_start & sparse_like, "sparse-start")
        run_slack(sparse_like - bad, "sparse-rest")

        if cliques:
            outliers = {v for c in cliques.values() for v in c.outliers}
            run_slack(outliers, "dense-outliers")
            synch_color_trial(net, state, cliques.values())
            aside = {v for c in cliques.values() for v in c.put_aside}
            cores = {v for c in cliques.values() for v in c.core(state)}
            run_slack(cores - aside, "dense-cores")
            color_put_aside(net, state, cliques.values())

    fallback_color(net, state, cap=config.fallback_cap(g.n))
    coloring = {v: state.nodes[v].color for v in range(g.n)}
    return coloring, net.stats()


def non_fallback_rounds(stats) -> int:
    return stats.rounds_used - stats.phase_rounds.get("fallback", 0)


# -- gather-and-greedy fallback ------------------------------------------------


def _flood_components(net, state, todo, cap, phase):
    """Min-id flood over the uncolored subgraph; returns (label, dist) and
    raises if any component exceeds the shattering cap."""
    g = net.graph
    tset = set(todo)
    label = {v: v for v in todo}
    dist = {v: 0 for v in todo}
    for _ in range(len(todo) + 1):
        payloads = {}
        for v in todo:
            w = BitWriter().put(KIND_CONTROL, 2).put(label[v], net.id_bits)
            wire = w.put(min(dist[v], (1 << 16) - 1), 16).done()
            for u in g.neighbors[v]:
                if int(u) in tset:
                    payloads[(v, int(u))] = wire
        if not payloads:
            break
        net.exchange(payloads, phase)
        snap = {v: (label[v], dist[v]) for v in todo}
        changed = False
        for v in todo:
            for u in g.neighbors[v]:
                u = int(u)
                if u in tset and \
                        (snap[u][0], snap[u][1] + 1) < (label[v], dist[v]):
                    label[v], dist[v] = snap[u][0], snap[u][1] + 1
                    changed = True
        if not changed:
            break
    comps: dict[int, list[int]] = {}
    for v in todo:
        comps.setdefault(label[v], []).append(v)
    for root, comp in comps.items():
        if cap is not None and len(comp) > cap:
            raise RuntimeError(
                f"shattering failure: residual component of {len(comp)} "
                f"uncolored nodes exceeds the cap {cap}")
    return comps, dist


def fallback_color(net: Network, state: ColoringState, uncolored=None,
                   cap: int | None = None, phase: str = "fallback") -> None:
    """Finish every remaining node deterministically.

    Components of the uncolored subgraph elect their min-id node by
    flooding and gather (id, palette hashes under a reference member's
    function, component adjacency) up the BFS tree; the root assigns
    greedily and streams the values back.  A node whose palette hashes
    collide into too few values is deferred to the next sweep, which picks
    a different reference member and therefore a fresh function.
    """
    g = net.graph
    todo = sorted(v for v in (state.uncolored() if uncolored is None
                              else uncolored)
                  if state.nodes[v].color is None)
    for sweep in range(32):
        if not todo:
            return
        comps, dist = _flood_components(net, state, todo, cap, phase)

        parents = {}
        refs = {}
        for root, comp in comps.items():
            comp.sort()
            refs[root] = comp[sweep % len(comp)]
            for v in comp:
                if v == root:
                    continue
                parents[v] = min(
                    int(u) for u in g.neighbors[v]
                    if int(u) in dist and dist[int(u)] == dist[v] - 1)

        depth = max(dist.values(), default=0)

        # reference hash spec travels down the tree
        for level in range(1, depth + 1):
            payloads = {}
            for root, comp in comps.items():
                spec = state.nodes[refs[root]].color_hash
                wire = BitWriter().put(KIND_CONTROL, 2).put(
                    refs[root], net.id_bits).put_bits(spec.to_bits()).done()
                for v in comp:
                    if dist[v] == level:
                        payloads[(parents[v], v)] = wire
            if payloads:
                net.exchange(payloads, phase)

        # palette hashes and adjacency stream up, concatenated per subtree
        def record_of(v, ref):
            nd = state.nodes[v]
            vals = [state.nodes[ref].announce_value(c)
                    for c in sorted(nd.palette)]
            nbrs = [int(u) for u in g.neighbors[v] if int(u) in dist]
            w = BitWriter().put(KIND_CONTROL, 2).put(v, net.id_bits)
            w.put(len(vals), 16)
            for val in vals:
                w.put(val, nd.color_hash.out_bits)
            w.put(len(nbrs), 16)
            for u in nbrs:
                w.put(u, net.id_bits)
            return w.done()

        acc = {}
        for root, comp in comps.items():
            for v in comp:
                acc[v] = BitWriter().put_bits(record_of(v, refs[root]))
        for level in range(depth, 0, -1):
            payloads = {}
            for v, p in parents.items():
                if dist[v] == level:
                    payloads[(v, p)] = acc[v].done()
            if payloads:
                net.exchange(payloads, phase)
                for v, p in parents.items():
                    if dist[v] == level:
                        acc[p].put_bits(acc[v].done())

        # greedy assignment at each root, then the reply path
        assigned = {}
        deferred = []
        for root, comp in comps.items():
            ref = state.nodes[refs[root]]
            cset = set(comp)
            for v in comp:
                nd = state.nodes[v]
                vals = []
                for c in sorted(nd.palette):
                    val = ref.announce_value(c)
                    if val not in vals:
                        vals.append(val)
                taken = {assigned[u] for u in g.neighbors[v]
                         if int(u) in cset and int(u) in assigned}
                free = [val for val in vals if val not in taken]
                if not free:
                    deferred.append(v)
                    continue
                assigned[v] = free[0]

        # each assigned value rides back down along its node's root path
        route: dict[int, list[int]] = {}
        for u in assigned:
            w = u
            while w in parents:
                route.setdefault(w, []).append(u)
                w = parents[w]
        val_bits = state.nodes[todo[0]].color_hash.out_bits
        for level in range(1, depth + 1):
            payloads = {}
            for v, carried in route.items():
                if dist[v] != level:
                    continue
                w = BitWriter().put(KIND_CONTROL, 2)
                for u in carried:
                    w.put(u, net.id_bits).put(assigned[u], val_bits)
                payloads[(parents[v], v)] = w.done()
            if payloads:
                net.exchange(payloads, phase)

        adopts = {}
        for root, comp in comps.items():
            ref = state.nodes[refs[root]]
            for v in comp:
                if v not in assigned:
                    continue
                nd = state.nodes[v]
                adopts[v] = min(c for c in nd.palette
                                if ref.announce_value(c) == assigned[v])
        _apply_adoptions(net, state, adopts, phase)
        todo = sorted(deferred)
    if todo:
        raise RuntimeError("fallback did not converge")


# -- verification and the exact oracle bundle ----------------------------------


@dataclass(frozen=True)
class VerifyReport:
    complete: bool
    proper: bool
    list_valid: bool
    violations: tuple

    @property
    def ok(self) -> bool:
        return self.complete and self.proper and self.list_valid


def verify_coloring(g, palettes, coloring: dict) -> VerifyReport:
    """Check completeness, properness, and list membership on raw colors;
    every violation is reported by name."""
    violations = []
    complete = True
    for v in range(g.n):
        if coloring.get(v) is None:
            complete = False
            violations.append(f"node {v} is uncolored")
    proper = True
    for u, v in g.edges:
        cu, cv = coloring.get(int(u)), coloring.get(int(v))
        if cu is not None and cu == cv:
            proper = False
            violations.append(f"edge ({u},{v}) shares color {cu}")
    list_valid = True
    for v in range(g.n):
        c = coloring.get(v)
        if c is not None and c not in set(palettes[v]):
            list_valid = False
            violations.append(f"node {v} wears color {c} outside its list")
    return VerifyReport(complete, proper, list_valid, tuple(violations))


def oracle_suite(g, palettes) -> dict:
    """Exact structural quantities for every node and edge, computed by the
    brute-force oracle; desk scale only."""
    report = {
        "global_sparsity": {}, "local_sparsity": {}, "discrepancy": {},
        "unevenness": {}, "slackability": {}, "c4_through_node": {},
        "disparity": {}, "triangles_per_edge": {},
    }
    for v in range(g.n):
        report["global_sparsity"][v] = oracle.global_sparsity(g, v)
        report["local_sparsity"][v] = oracle.local_sparsity(g, v)
        report["discrepancy"][v] = oracle.discrepancy(g, palettes, v)
        report["unevenness"][v] = oracle.unevenness(g, v)
        report["slackability"][v] = oracle.slackability(g, palettes, v)
        report["c4_through_node"][v] = oracle.c4_through_node(g, v)
    report["triangles_per_edge"] = oracle.triangles_per_edge(g)
    for u, v in g.edges:
        u, v = int(u), int(v)
        report["disparity"][(u, v)] = oracle.disparity(palettes, u, v)
        report["disparity"][(v, u)] = oracle.disparity(palettes, v, u)
    return report
