"""Almost-clique machinery: leaders, inlier partitions, put-aside sets,
the synchronized color trial, and relay-based put-aside coloring.

Every almost-clique has diameter at most 2 through its own edges (each
member neighbors most of the clique), so clique-wide coordination runs as
leader broadcasts and gathers with at most one relay hop.  All exchanges
are merged across cliques: one call processes every clique in the same
supersteps, as they would run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .bitio import BitWriter
from .coloring import (KIND_CONTROL, ColoringState, _apply_adoptions,
                       try_color)
from .runtime import Network


class SlackClass(Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class DenseParams:
    """Constants the asymptotic analysis leaves free."""

    c_class: float = 4.0   # Low iff slackability estimate <= c_class * ell
    c_pa: float = 2.0      # put-aside sets trimmed to c_pa * ell members
    ell_override: int | None = None


def ell_of(delta: int, override: int | None = None) -> int:
    """The low/high slack threshold scale: log^2.1 of the max degree,
    floored at 4 so tiny instances stay non-degenerate."""
    if override is not None:
        return int(override)
    return max(math.ceil(math.log2(max(delta, 2)) ** 2.1), 4)


@dataclass
class CliqueInfo:
    clique_id: int
    members: list[int]
    delta_c: int
    ell: int
    leader: int | None = None
    inliers: list[int] = field(default_factory=list)
    outliers: list[int] = field(default_factory=list)
    put_aside: list[int] = field(default_factory=list)
    core_members: list[int] | None = None
    slack_class: SlackClass | None = None
    slackability_estimate: float | None = None

    def core(self, state: ColoringState) -> list[int]:
        """Uncolored inliers."""
        return [v for v in self.inliers if state.nodes[v].color is None]


# -- shared helpers ----------------------------------------------------------


def _routes(net: Network, clique: CliqueInfo):
    """Members adjacent to the leader, and one such relay per 2-hop member."""
    g, x = net.graph, clique.leader
    direct = [v for v in clique.members if v != x and g.has_edge(x, v)]
    dset = set(direct)
    far = {}
    for v in clique.members:
        if v == x or v in dset:
            continue
        far[v] = next((int(u) for u in g.neighbors[v] if int(u) in dset),
                      None)
    return direct, far


def _leader_broadcast(net, payload_of, cliques, phase):
    """Send payload_of(clique) from each leader to all members, one relay
    hop for members not adjacent to the leader.  Two supersteps."""
    down, forward = {}, {}
    for c in cliques:
        wire = payload_of(c)
        direct, far = _routes(net, c)
        for v in direct:
            down[(c.leader, v)] = wire
        for v, r in far.items():
            if r is not None:
                forward[(r, v)] = wire
    if down:
        net.exchange(down, phase)
    if forward:
        net.exchange(forward, phase)


def _gather_at_leaders(net, record_of, cliques, phase):
    """Send record_of(clique, v) from each member to its leader, relaying
    2-hop members' records in one concatenated forward.  Two supersteps."""
    first, second = {}, {}
    for c in cliques:
        direct, far = _routes(net, c)
        for v in direct:
            first[(v, c.leader)] = record_of(c, v)
        by_relay: dict[int, BitWriter] = {}
        for v, r in far.items():
            if r is None:
                continue
            first[(v, r)] = record_of(c, v)
            by_relay.setdefault(r, BitWriter()).put_bits(record_of(c, v))
        for r, w in by_relay.items():
            second[(r, c.leader)] = w.done()
    if first:
        net.exchange(first, phase)
    if second:
        net.exchange(second, phase)


def _count_bits(net: Network) -> int:
    return net.id_bits + 2


# -- construction and local quantities ---------------------------------------


def build_cliques(net: Network, clique_of: dict[int, int],
                  params: DenseParams | None = None,
                  phase: str = "clique-build") -> dict[int, CliqueInfo]:
    """Group dense nodes by clique id and charge the knowledge exchange.

    Every node broadcasts (has-clique flag, clique id); dense nodes then
    stream their in-clique adjacency lists so that all members know the
    member list via the diameter-2 property.
    """
    params = params or DenseParams()
    g = net.graph
    id_bits = net.id_bits
    payloads = {}
    for v in range(g.n):
        cid = clique_of.get(v)
        w = BitWriter().put(KIND_CONTROL, 2).put(int(cid is not None), 1)
        w.put(0 if cid is None else cid % (1 << id_bits), id_bits)
        wire = w.done()
        for u in g.neighbors[v]:
            payloads[(v, int(u))] = wire
    if payloads:
        net.exchange(payloads, phase)

    members: dict[int, list[int]] = {}
    for v, cid in clique_of.items():
        members.setdefault(cid, []).append(v)

    payloads = {}
    for cid, mem in members.items():
        mset = set(mem)
        for v in mem:
            inc = [int(u) for u in g.neighbors[v] if int(u) in mset]
            w = BitWriter().put(KIND_CONTROL, 2)
            for u in inc:
                w.put(u, id_bits)
            wire = w.done()
            for u in inc:
                payloads[(v, u)] = wire
    if payloads:
        net.exchange(payloads, phase)

    out = {}
    for cid, mem in members.items():
        mem = sorted(mem)
        delta_c = max(g.degree(v) for v in mem)
        out[cid] = CliqueInfo(cid, mem, delta_c,
                              ell_of(g.max_degree(), params.ell_override))
    return out


def chromatic_slack(state: ColoringState, v: int) -> int:
    """Neighbors whose announced permanent color lies outside v's original
    palette (checked at the hash level under v's announcement hash)."""
    nd = state.nodes[v]
    own = {nd.announce_value(c) for c in nd.original}
    return sum(1 for value in nd.neighbor_color_hashes.values()
               if value not in own)


def ext_degree(net: Network, clique_of: dict, v: int) -> int:
    own = clique_of.get(v)
    return sum(1 for u in net.graph.neighbors[v]
               if clique_of.get(int(u)) != own)


def anti_degree(net: Network, clique: CliqueInfo, v: int) -> int:
    mset = set(clique.members)
    in_c = sum(1 for u in net.graph.neighbors[v] if int(u) in mset)
    return len(clique.members) - 1 - in_c


# -- leader selection and classification -------------------------------------


def select_leader(net: Network, state: ColoringState, cliques,
                  clique_of: dict[int, int],
                  phase: str = "leader") -> dict[int, int]:
    """Argmin of (external degree + anti-degree + chromatic slack), ties by
    ID, via a 2-round min-reduction through each clique."""
    cliques = list(cliques)
    agg_bits = _count_bits(net) + 2
    best: dict[int, tuple] = {}
    keys: dict[int, dict[int, tuple]] = {}
    for c in cliques:
        keys[c.clique_id] = {
            v: (ext_degree(net, clique_of, v) + anti_degree(net, c, v)
                + chromatic_slack(state, v), v)
            for v in c.members}
        best[c.clique_id] = min(keys[c.clique_id].values())

    g = net.graph
    for sweep in range(2):
        payloads = {}
        for c in cliques:
            mset = set(c.members)
            for v in c.members:
                agg, vid = (keys[c.clique_id][v] if sweep == 0
                            else best[c.clique_id])
                wire = BitWriter().put(KIND_CONTROL, 2).put(
                    min(agg, (1 << agg_bits) - 1), agg_bits).put(
                    vid, net.id_bits).done()
                for u in g.neighbors[v]:
                    if int(u) in mset:
                        payloads[(v, int(u))] = wire
        if payloads:
            net.exchange(payloads, phase)

    out = {}
    for c in cliques:
        c.leader = best[c.clique_id][1]
        out[c.clique_id] = c.leader
    return out


def classify_slackability(net: Network, state: ColoringState, cliques,
                          clique_of: dict[int, int],
                          params: DenseParams | None = None,
                          phase: str = "classify"
                          ) -> dict[int, tuple[SlackClass, float]]:
    """Estimate each clique's slackability at its leader and classify.

    The leader broadcasts a membership bitmap of N_C(x); those neighbors
    reply with their edge counts into the set, giving m(N_C(x)) and the
    sparsity proxy.  The estimate is e_x + zeta_hat_x + kappa_x.
    """
    params = params or DenseParams()
    cliques = list(cliques)
    g = net.graph
    ncx: dict[int, list[int]] = {}
    for c in cliques:
        if c.leader is None:
            raise RuntimeError("select_leader must run first")
        ncx[c.clique_id] = [v for v in c.members
                            if v != c.leader and g.has_edge(c.leader, v)]

    def bitmap_of(c):
        inset = set(ncx[c.clique_id])
        w = BitWriter().put(KIND_CONTROL, 2)
        for v in c.members:
            w.put(int(v in inset), 1)
        return w.done()

    _leader_broadcast(net, bitmap_of, cliques, phase)

    counts = {}
    payloads = {}
    for c in cliques:
        inset = set(ncx[c.clique_id])
        for u in ncx[c.clique_id]:
            k = sum(1 for t in g.neighbors[u] if int(t) in inset)
            counts[(c.clique_id, u)] = k
            payloads[(u, c.leader)] = BitWriter().put(KIND_CONTROL, 2).put(
                k, _count_bits(net)).done()
    if payloads:
        net.exchange(payloads, phase)

    out = {}
    for c in cliques:
        x = c.leader
        d_x = g.degree(x)
        m_hat = sum(counts[(c.clique_id, u)] for u in ncx[c.clique_id]) // 2
        zeta_hat = ((math.comb(d_x, 2) - m_hat) / d_x) if d_x else 0.0
        estimate = (ext_degree(net, clique_of, x) + zeta_hat
                    + chromatic_slack(state, x))
        c.slackability_estimate = estimate
        c.slack_class = (SlackClass.LOW
                         if estimate <= params.c_class * c.ell
                         else SlackClass.HIGH)
        out[c.clique_id] = (c.slack_class, estimate)
    return out


def partition_inliers_outliers(net: Network, state: ColoringState, cliques,
                               phase: str = "partition"
                               ) -> dict[int, tuple[list[int], list[int]]]:
    """Leaders mark outliers by the three rules and notify members.

    Rules: the max(d_x,|C|)/3 members sharing the fewest neighbors with
    the leader; the |C|/6 members of largest degree; members not adjacent
    to the leader.  Ties break by ID; the leader is never an outlier.
    """
    cliques = list(cliques)
    g = net.graph
    cb = _count_bits(net)

    def nbr_stream(c):
        w = BitWriter().put(KIND_CONTROL, 2)
        for u in sorted(int(t) for t in g.neighbors[c.leader]):
            w.put(u, net.id_bits)
        return w.done()

    _leader_broadcast(net, nbr_stream, cliques, phase)

    def record_of(c, v):
        x_nbrs = set(int(t) for t in g.neighbors[c.leader])
        common = sum(1 for t in g.neighbors[v] if int(t) in x_nbrs)
        return BitWriter().put(KIND_CONTROL, 2).put(common, cb).put(
            g.degree(v), cb).put(int(g.has_edge(c.leader, v)), 1).done()

    _gather_at_leaders(net, record_of, cliques, phase)

    out = {}
    for c in cliques:
        x = c.leader
        x_nbrs = set(int(t) for t in g.neighbors[x])
        rest = [v for v in c.members if v != x]
        common = {v: sum(1 for t in g.neighbors[v] if int(t) in x_nbrs)
                  for v in rest}
        k1 = math.ceil(max(g.degree(x), len(c.members)) / 3)
        k2 = math.ceil(len(c.members) / 6)
        fewest = sorted(rest, key=lambda v: (common[v], v))[:k1]
        largest = sorted(rest, key=lambda v: (-g.degree(v), v))[:k2]
        anti = [v for v in rest if v not in x_nbrs]
        outliers = sorted(set(fewest) | set(largest) | set(anti))
        c.outliers = outliers
        c.inliers = sorted(set(c.members) - set(outliers))
        out[c.clique_id] = (c.inliers, c.outliers)

    def flag_of(c):
        oset = set(c.outliers)
        w = BitWriter().put(KIND_CONTROL, 2)
        for v in c.members:
            w.put(int(v in oset), 1)
        return w.done()

    _leader_broadcast(net, flag_of, cliques, phase)
    return out


# -- put-aside sets ----------------------------------------------------------


def put_aside(net: Network, state: ColoringState, cliques,
              clique_of: dict[int, int], params: DenseParams | None = None,
              phase: str = "put-aside") -> dict[int, list[int]]:
    """Sample put-aside sets in every low-slack clique simultaneously.

    Core members flip a p = ell^2/(48 Δ_C) coin (clamped to 1); a sampled
    node withdraws if any neighbor in ANOTHER clique was also sampled, so
    put-aside sets of different cliques have no edges between them.  The
    leader trims the survivors to c_pa * ell members by ID order and
    broadcasts the final list.
    """
    params = params or DenseParams()
    low = [c for c in cliques if c.slack_class is SlackClass.LOW]
    g = net.graph

    sampled: set[int] = set()
    for c in low:
        c.core_members = sorted(c.core(state))
        p = min(1.0, c.ell ** 2 / (48.0 * max(1, c.delta_c)))
        for v in c.core_members:
            if v != c.leader and net.rng(v).random() < p:
                sampled.add(v)

    flag = BitWriter().put(KIND_CONTROL, 2).put(1, 1).done()
    payloads = {(v, int(u)): flag for v in sorted(sampled)
                for u in g.neighbors[v]}
    if payloads:
        net.exchange(payloads, phase)

    survivors = {v for v in sampled
                 if not any(int(u) in sampled
                            and clique_of.get(int(u)) != clique_of[v]
                            for u in g.neighbors[v])}

    # relays forward the ids of 2-hop survivors to each leader
    second = {}
    for c in low:
        _, far = _routes(net, c)
        by_relay: dict[int, list[int]] = {}
        for v, r in far.items():
            if v in survivors and r is not None:
                by_relay.setdefault(r, []).append(v)
        for r, ids in by_relay.items():
            w = BitWriter().put(KIND_CONTROL, 2)
            for v in ids:
                w.put(v, net.id_bits)
            second[(r, c.leader)] = w.done()
    if second:
        net.exchange(second, phase)

    out = {}
    for c in low:
        keep = sorted(v for v in c.core_members if v in survivors)
        c.put_aside = keep[:int(params.c_pa * c.ell)]
        out[c.clique_id] = list(c.put_aside)

    def list_of(c):
        w = BitWriter().put(KIND_CONTROL, 2)
        for v in c.put_aside:
            w.put(v, net.id_bits)
        return w.done()

    _leader_broadcast(net, list_of, low, phase)
    return out


# -- synchronized color trial -------------------------------------------------


def synch_color_trial(net: Network, state: ColoringState, cliques,
                      phase: str = "synch-trial") -> dict[int, bool]:
    """Each leader deals a random permutation of its palette, one color per
    uncolored inlier outside the put-aside set; recipients with a palette
    preimage of the received hash try that color."""
    g = net.graph
    payloads = {}
    self_tries = {}
    for c in cliques:
        x = c.leader
        aside = set(c.put_aside)
        targets = [v for v in c.core(state) if v not in aside]
        pal = sorted(state.nodes[x].palette)
        rng = net.rng(x)
        for i in range(len(pal) - 1, 0, -1):
            j = rng.randrange(i + 1)
            pal[i], pal[j] = pal[j], pal[i]
        for i, v in enumerate(targets):
            if i >= len(pal):
                break
            if v == x:
                self_tries[x] = pal[i]
                continue
            value = state.nodes[v].announce_value(pal[i])
            payloads[(x, v)] = BitWriter().put(KIND_CONTROL, 2).put(
                value, state.nodes[v].color_hash.out_bits).done()
    delivered = net.exchange(payloads, phase) if payloads else {}

    tries = dict(self_tries)
    for (x, v), wire in delivered.items():
        value = wire.value >> 2
        nd = state.nodes[v]
        cands = [col for col in nd.palette
                 if nd.announce_value(col) == value]
        if cands:
            tries[v] = min(cands)
    return try_color(net, state, tries, phase) if tries else {}


# -- coloring the put-aside sets ----------------------------------------------


def relay_intervals(core_members, k: int) -> list[list[int]]:
    """Disjoint contiguous blocks of 2k+1 core members, one per put-aside
    node in ID order."""
    step = 2 * k + 1
    return [core_members[j * step:(j + 1) * step] for j in range(k)]


def _pad8(width: int) -> int:
    return width + (-width) % 8


def color_put_aside(net: Network, state: ColoringState, cliques,
                    phase: str = "color-put-aside") -> set[int]:
    """Color the put-aside sets through core relays; returns deferred nodes.

    Each put-aside node ships |N(v) ∩ P_C|+1 palette-color hashes (under
    the leader's hash) plus its P_C-adjacency bitmap, one record per relay
    neighbor in its interval; the leader greedily assigns distinct colors
    to adjacent put-aside nodes and answers through the same relays.
    Nodes without enough relays, or cliques whose frozen core is smaller
    than 2|P|^2+|P|, are deferred to the fallback.
    """
    g = net.graph
    id_bits = net.id_bits
    deferred: set[int] = set()
    plans = {}  # (cid, v) -> dict with relays, values, value->color, bitmap
    active = []
    for c in cliques:
        P = sorted(v for v in c.put_aside if state.nodes[v].color is None)
        if not P:
            continue
        k = len(P)
        core = c.core_members or []
        if len(core) < 2 * k * k + k:
            deferred.update(P)
            continue
        active.append((c, P))
        out_bits = state.nodes[c.leader].color_hash.out_bits
        width = _pad8(2 + id_bits + out_bits + k)
        intervals = relay_intervals(core, k)
        pindex = {u: i for i, u in enumerate(P)}
        for j, v in enumerate(P):
            nd = state.nodes[v]
            nbrs_p = [int(u) for u in g.neighbors[v] if int(u) in pindex]
            needed = min(len(nbrs_p) + 1, len(nd.palette))
            relays = [r for r in intervals[j]
                      if r != c.leader and g.has_edge(v, r)][:needed]
            if len(relays) < needed:
                deferred.add(v)
                continue
            cands = sorted(nd.palette)[:needed]
            xs = state.nodes[c.leader]
            values = [xs.announce_value(col) for col in cands]
            val_to_col = {}
            for col, val in zip(cands, values):
                val_to_col.setdefault(val, col)
            bitmap = 0
            for u in nbrs_p:
                bitmap |= 1 << pindex[u]
            plans[(c.clique_id, v)] = {
                "relays": relays, "values": values, "map": val_to_col,
                "bitmap": bitmap, "width": width, "out_bits": out_bits,
            }

    # request: put-aside node -> relay -> leader
    up1, up2 = {}, {}
    for c, P in active:
        for v in P:
            plan = plans.get((c.clique_id, v))
            if plan is None:
                continue
            k = len(P)
            for i, r in enumerate(plan["relays"]):
                w = BitWriter().put(KIND_CONTROL, 2).put(v, id_bits)
                w.put(plan["values"][i], plan["out_bits"]).put(
                    plan["bitmap"], k)
                pad = plan["width"] - (2 + id_bits + plan["out_bits"] + k)
                if pad:
                    w.put(0, pad)
                wire = w.done()
                up1[(v, r)] = wire
                up2[(r, c.leader)] = wire
    if up1:
        net.exchange(up1, phase)
    if up2:
        net.exchange(up2, phase)

    # greedy assignment at each leader, then the reply path
    adopts = {}
    down1, down2 = {}, {}
    for c, P in active:
        assigned: dict[int, int] = {}
        pindex = {u: i for i, u in enumerate(P)}
        k = len(P)
        for v in P:
            plan = plans.get((c.clique_id, v))
            if plan is None:
                continue
            taken = {assigned[u] for u in P
                     if u in assigned and plan["bitmap"] >> pindex[u] & 1}
            free = [val for val in plan["values"] if val not in taken]
            if not free:
                deferred.add(v)
                continue
            assigned[v] = min(free)
            adopts[v] = plan["map"][assigned[v]]
            r = plan["relays"][0]
            w = BitWriter().put(KIND_CONTROL, 2).put(v, id_bits).put(
                assigned[v], plan["out_bits"])
            pad = plan["width"] - (2 + id_bits + plan["out_bits"] + k)
            if pad:
                w.put(0, pad + k)
            wire = w.done()
            down1[(c.leader, r)] = wire
            down2[(r, v)] = wire
    if down1:
        net.exchange(down1, phase)
    if down2:
        net.exchange(down2, phase)

    _apply_adoptions(net, state, adopts, phase)
    return deferred
