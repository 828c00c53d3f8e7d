"""Distributed structure probes.

Sparsity estimation, triangle and four-cycle detection, the buddy
predicate (idealized and uniform backends), and the almost-clique
decomposition.  Every operation here moves real messages through the
superstep network; protocols that run on many edges at once share their
supersteps so the recorded round counts reflect a parallel execution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bitio import Bits, bitmask_of
from .hashing import (Backend, choose_low_collision_hash, derive, make_ecc,
                      make_hash, sample_multiset)
from .sketch import (SIZE_FIELD_BITS, SimilarityResult, SketchParams,
                     _hit_image, _scaled)


class SparsityKind(Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True)
class SparsityEstimate:
    """A node's estimated sparsity; ``valid`` is cleared when the local
    variant's degree precondition fails (the value is still reported)."""

    node: int
    value: float
    kind: SparsityKind
    eps: float
    valid: bool = True


class NodeRole(Enum):
    SPARSE = "sparse"
    UNEVEN = "uneven"
    DENSE = "dense"


@dataclass(frozen=True)
class AcdLabels:
    """Roles plus the almost-clique membership of the dense nodes."""

    role: dict
    clique_id: dict
    eps_acd: float
    eps_spa: float

    def cliques(self) -> dict:
        out: dict[int, list[int]] = {}
        for v, c in self.clique_id.items():
            out.setdefault(c, []).append(v)
        return {c: sorted(vs) for c, vs in out.items()}


def _arr(S) -> np.ndarray:
    if isinstance(S, np.ndarray):
        return S.astype(np.uint64, copy=False)
    return np.array(sorted(int(x) for x in S), dtype=np.uint64)


def _bits_of_vec(vec: np.ndarray) -> Bits:
    val = 0
    for i, b in enumerate(vec.tolist()):
        if b:
            val |= 1 << i
    return Bits(val, len(vec))


def batched_similarity(net, jobs: dict, eps: float, nu: float,
                       params: SketchParams, phase: str) -> dict:
    """Run the mask-exchange intersection estimator for many jobs at once.

    ``jobs`` maps a key to (u, v, S_u, S_v) where uv is an edge carrying
    that job's traffic.  Jobs sharing an edge are serialized into waves;
    within a wave all jobs ride the same supersteps (sizes, seed, masks),
    so rounds are counted as a parallel execution would.  Returns a map
    key -> SimilarityResult with both-endpoint estimates.
    """
    waves: dict[int, list] = {}
    edge_use: dict[tuple, int] = {}
    for key in sorted(jobs):
        u, v = jobs[key][0], jobs[key][1]
        e = (min(u, v), max(u, v))
        w = edge_use.get(e, 0)
        edge_use[e] = w + 1
        waves.setdefault(w, []).append(key)
    out: dict = {}
    for w in sorted(waves):
        keys = waves[w]
        arrs = {}
        size_payload = {}
        for key in keys:
            u, v, S_u, S_v = jobs[key]
            arrs[key] = (_arr(S_u), _arr(S_v))
            size_payload[(u, v)] = Bits(arrs[key][0].size, SIZE_FIELD_BITS)
            size_payload[(v, u)] = Bits(arrs[key][1].size, SIZE_FIELD_BITS)
        net.exchange(size_payload, phase)
        seeds = {}
        for key in keys:
            u, v = jobs[key][0], jobs[key][1]
            au, av = arrs[key]
            if au.size and av.size:
                seeds[key] = net.edge_shared_seed(u, v, phase)
        mask_payload = {}
        meta = {}
        for key in keys:
            u, v = jobs[key][0], jobs[key][1]
            au, av = arrs[key]
            if not (au.size and av.size):
                out[key] = SimilarityResult(0.0, 2 * SIZE_FIELD_BITS, 1)
                continue
            k, T, l = params.derive_sizes(au.size, av.size, eps, nu)
            su, ub = _scaled(au, k, net.id_bits)
            sv, _ = _scaled(av, k, net.id_bits)
            h = make_hash(Backend.IDEALIZED, ub, T, seeds[key])
            mu = bitmask_of(_hit_image(su, h, l).tolist(), l)
            mv = bitmask_of(_hit_image(sv, h, l).tolist(), l)
            mask_payload[(u, v)] = mu
            mask_payload[(v, u)] = mv
            meta[key] = (k, T, l, mu, mv)
        if mask_payload:
            net.exchange(mask_payload, phase)
        for key, (k, T, l, mu, mv) in meta.items():
            count = (mu.value & mv.value).bit_count()
            out[key] = SimilarityResult(count * T / (l * k),
                                        2 * SIZE_FIELD_BITS + 64 + 2 * l, k,
                                        out_size=T, mask_bits=l,
                                        shared_count=count)
    return out


# -- sparsity -----------------------------------------------------------------

def estimate_sparsity(net, eps: float, nu: float = 0.1,
                      params: SketchParams = SketchParams()) -> dict:
    """Estimate every node's global sparsity.

    One overlap estimate per edge serves both endpoints; node v then
    combines its incident estimates into (Delta-1)/2 - (1/(2 Delta)) sum s_u.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    g = net.graph
    delta = g.max_degree()
    if delta == 0:
        return {v: SparsityEstimate(v, 0.0, SparsityKind.GLOBAL, eps)
                for v in range(g.n)}
    jobs = {}
    for u, v in map(tuple, g.edges.tolist()):
        jobs[(u, v)] = (u, v, g.neighbors[u], g.neighbors[v])
    res = batched_similarity(net, jobs, eps / 2.0, nu, params, "sparsity")
    acc = [0.0] * g.n
    for (u, v), r in res.items():
        acc[u] += r.estimate
        acc[v] += r.estimate
    return {v: SparsityEstimate(v, (delta - 1) / 2.0 - acc[v] / (2.0 * delta),
                                SparsityKind.GLOBAL, eps)
            for v in range(g.n)}


def estimate_local_sparsity(net, eps: float, nu: float = 0.1,
                            params: SketchParams = SketchParams()) -> dict:
    """Estimate every node's local (own-degree) sparsity.

    Degrees are exchanged first; the estimate restricts v's side to
    neighbors of degree < 2 d_v and substitutes d_v for Delta in the
    output formula.  A node with too many high-degree neighbors (at least
    eps d_v / 3 of them) gets its estimate flagged invalid.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    g = net.graph
    deg_payload = {}
    for u, v in map(tuple, g.edges.tolist()):
        deg_payload[(u, v)] = Bits(g.degree(u), SIZE_FIELD_BITS)
        deg_payload[(v, u)] = Bits(g.degree(v), SIZE_FIELD_BITS)
    if deg_payload:
        net.exchange(deg_payload, "local-sparsity")
    jobs = {}
    elig = {}
    valid = {}
    for v in range(g.n):
        dv = g.degree(v)
        if dv == 0:
            continue
        nbrs = g.neighbors[v]
        keep = nbrs[g.degrees[nbrs] < 2 * dv]
        elig[v] = keep
        valid[v] = (dv - keep.size) < eps * dv / 3.0
        for u in keep.tolist():
            jobs[(v, u)] = (v, u, keep, g.neighbors[u])
    res = batched_similarity(net, jobs, eps / 3.0, nu, params,
                             "local-sparsity")
    out = {}
    for v in range(g.n):
        dv = g.degree(v)
        if dv == 0:
            out[v] = SparsityEstimate(v, 0.0, SparsityKind.LOCAL, eps)
            continue
        s = sum(res[(v, u)].estimate for u in elig[v].tolist())
        out[v] = SparsityEstimate(v, (dv - 1) / 2.0 - s / (2.0 * dv),
                                  SparsityKind.LOCAL, eps,
                                  valid=bool(valid[v]))
    return out


# -- triangle / four-cycle detection ------------------------------------------

def detect_round_cap(eps: float, nu: float = 0.1,
                     params: SketchParams = SketchParams()) -> int:
    """n- and Delta-free bound on detection rounds.

    The exchanged masks carry l = min(T, l_formula) bits and l_formula
    depends only on (eps, nu, params); with the minimum bandwidth of 32
    bits the mask exchange takes at most ceil(l_formula / 32) rounds, plus
    a constant for sizes, the seed, and slack.
    """
    eps_sim = eps / 2.0
    alpha = eps_sim * eps_sim / 8.0
    beta = eps_sim / 4.0
    l_formula = math.ceil(params.samp_const * math.log(12.0 / nu)
                          / (alpha * beta * beta))
    return 5 + math.ceil(l_formula / 32.0)


def detect_triangle_edges(net, eps: float, nu: float = 0.1,
                          params: SketchParams = SketchParams(),
                          edges=None) -> dict:
    """Flag each probed edge uv with whether |N(u) <intersect> N(v)| is
    estimated at eps*Delta/2 or more (the midpoint between the sparse and
    rich planted regimes; every common neighbor is one triangle on uv)."""
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    g = net.graph
    delta = g.max_degree()
    if edges is None:
        pairs = [tuple(e) for e in g.edges.tolist()]
    else:
        pairs = [(min(u, v), max(u, v)) for u, v in edges]
    jobs = {(u, v): (u, v, g.neighbors[u], g.neighbors[v])
            for u, v in pairs}
    res = batched_similarity(net, jobs, eps / 2.0, nu, params, "triangle")
    thr = eps * delta / 2.0
    return {e: bool(res[e].estimate >= thr) for e in jobs}


def detect_c4_wedges(net, eps: float, nu: float = 0.1,
                     params: SketchParams = SketchParams(),
                     centers=None, pairs=None) -> dict:
    """Flag wedges (v, (a, b)) whose arms a, b share an estimated
    eps*Delta/2 common neighbors besides v (each is one 4-cycle through v).

    Each center draws a single hash and broadcasts its seed; every
    neighbor replies with the hit-image mask of its whole neighborhood
    under that one hash, and v scores all of its pairs from the masks.
    ``pairs`` optionally maps a center to the neighbor pairs to score
    (default: all of them).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    g = net.graph
    delta = g.max_degree()
    if delta == 0:
        return {}
    cs = list(range(g.n)) if centers is None else sorted(set(centers))
    k, T, l = params.derive_sizes(delta, delta, eps / 2.0, nu)
    seeds = {}
    seed_payload = {}
    for v in cs:
        if g.degree(v) < 2:
            continue
        s = net.rng(v).next64()
        seeds[v] = s
        for u in g.neighbors[v].tolist():
            seed_payload[(v, u)] = Bits(s, 64)
    if not seeds:
        return {}
    net.exchange(seed_payload, "c4")
    jbits = 0 if k == 1 else max(1, (k - 1).bit_length())
    ubs = net.id_bits + jbits
    reply_payload = {}
    for v, s in seeds.items():
        h = make_hash(Backend.IDEALIZED, ubs, T, s)
        for u in g.neighbors[v].tolist():
            su, _ = _scaled(_arr(g.neighbors[u]), k, net.id_bits)
            reply_payload[(u, v)] = bitmask_of(_hit_image(su, h, l).tolist(), l)
    net.exchange(reply_payload, "c4")
    thr = eps * delta / 2.0
    out = {}
    for v in sorted(seeds):
        h = make_hash(Backend.IDEALIZED, ubs, T, seeds[v])
        selfrep, _ = _scaled(np.array([v], dtype=np.uint64), k, net.id_bits)
        self_cells = [int(c) for c in h.eval_many(selfrep).tolist() if c <= l]
        nbrs = g.neighbors[v].tolist()
        if pairs is None:
            plist = list(itertools.combinations(nbrs, 2))
        else:
            plist = [(min(a, b), max(a, b)) for a, b in pairs.get(v, [])]
        for a, b in plist:
            both = reply_payload[(a, v)].value & reply_payload[(b, v)].value
            count = both.bit_count()
            self_count = sum(1 for c in set(self_cells) if (both >> (c - 1)) & 1)
            est = max(0, count - self_count) * T / (l * k)
            out[(v, (a, b))] = bool(est >= thr)
    return out


# -- the buddy predicate -------------------------------------------------------

def _unique_cell_map(nbrs: np.ndarray, spec) -> dict:
    """Map hash cell -> the unique element of nbrs landing there."""
    arr = _arr(nbrs)
    if arr.size == 0:
        return {}
    hs = spec.eval_many(arr)
    vals, first, counts = np.unique(hs, return_index=True, return_counts=True)
    keep = counts == 1
    return dict(zip(vals[keep].tolist(), arr[first[keep]].tolist()))


def buddy(net, eps: float, backend: Backend = Backend.IDEALIZED,
          edges=None, nu: float = 0.1,
          params: SketchParams = SketchParams()) -> dict:
    """The friendship predicate on each probed edge.

    Both backends first reject unbalanced edges (degrees differing by more
    than a 1/(1-eps) factor).  The idealized backend then estimates the
    neighborhood overlap and thresholds it at (1-2 eps) min(d_u, d_v).
    The uniform backend runs the explicit-hash protocol: the higher-id
    endpoint picks a low-collision pairwise hash over [6 max(d_u,d_v)/eps],
    both sides exchange unique-preimage indicators at min(B, T) sampled
    positions, a count test rejects weak overlaps, and a sampled Hamming
    test over ECC-expanded preimage strings rejects collision-made ties.
    """
    if not 0 < eps < 1 / 6:
        raise ValueError("eps must be in (0, 1/6)")
    g = net.graph
    if edges is None:
        pairs = [tuple(e) for e in g.edges.tolist()]
    else:
        pairs = [(min(u, v), max(u, v)) for u, v in edges]
    pairs = sorted(set(pairs))
    deg_payload = {}
    for u, v in pairs:
        deg_payload[(u, v)] = Bits(g.degree(u), SIZE_FIELD_BITS)
        deg_payload[(v, u)] = Bits(g.degree(v), SIZE_FIELD_BITS)
    if not pairs:
        return {}
    net.exchange(deg_payload, "buddy")
    flags = {e: False for e in pairs}
    survivors = []
    for u, v in pairs:
        du, dv = g.degree(u), g.degree(v)
        if du > dv / (1 - eps) or dv > du / (1 - eps):
            continue
        survivors.append((u, v))
    if not survivors:
        return flags

    if backend is Backend.IDEALIZED:
        jobs = {(u, v): (u, v, g.neighbors[u], g.neighbors[v])
                for u, v in survivors}
        res = batched_similarity(net, jobs, eps / 2.0, nu, params, "buddy")
        for u, v in survivors:
            thr = (1 - 2 * eps) * min(g.degree(u), g.degree(v))
            flags[(u, v)] = bool(res[(u, v)].estimate >= thr)
        return flags

    # uniform backend
    ecc = make_ecc(net.id_bits)
    specs = {}
    announce = {}
    for u, v in survivors:
        chooser = max(u, v)
        T = math.ceil(6 * max(g.degree(u), g.degree(v)) / eps)
        budget = int(eps * g.degree(chooser) / 3)
        spec = choose_low_collision_hash(net.id_bits, T,
                                         g.neighbors[chooser].tolist(),
                                         budget, net.rng(chooser).next64())
        specs[(u, v)] = spec
        announce[(chooser, min(u, v))] = spec.to_bits()
    net.exchange(announce, "buddy")
    seeds = {(u, v): net.edge_shared_seed(u, v, "buddy")
             for u, v in survivors}
    B = net.bandwidth_bits
    bit_payload = {}
    stage1 = {}
    for u, v in survivors:
        spec = specs[(u, v)]
        l = min(B, spec.out_size)
        S = sample_multiset(spec.out_size, l,
                            derive(seeds[(u, v)], 1)).positions()
        cmap_u = _unique_cell_map(g.neighbors[u], spec)
        cmap_v = _unique_cell_map(g.neighbors[v], spec)
        bu = np.array([p in cmap_u for p in S.tolist()], dtype=np.uint8)
        bv = np.array([p in cmap_v for p in S.tolist()], dtype=np.uint8)
        stage1[(u, v)] = (S, bu, bv, cmap_u, cmap_v)
        bit_payload[(u, v)] = _bits_of_vec(bu)
        bit_payload[(v, u)] = _bits_of_vec(bv)
    net.exchange(bit_payload, "buddy")
    ham_payload = {}
    stage2 = {}
    for u, v in survivors:
        S, bu, bv, cmap_u, cmap_v = stage1[(u, v)]
        shared = np.flatnonzero(bu & bv)
        ones = min(int(bu.sum()), int(bv.sum()))
        if ones == 0 or shared.size <= (1 - 3 * eps) * ones:
            continue
        cells = S[shared].tolist()
        codes_u = ecc.encode_many([cmap_u[c] for c in cells])
        codes_v = ecc.encode_many([cmap_v[c] for c in cells])
        xu = ((codes_u[:, None] >> np.arange(ecc.code_bits, dtype=np.uint64))
              & np.uint64(1)).astype(np.uint8).ravel()
        xv = ((codes_v[:, None] >> np.arange(ecc.code_bits, dtype=np.uint64))
              & np.uint64(1)).astype(np.uint8).ravel()
        length = int(xu.size)
        l2 = min(B, length)
        S2 = sample_multiset(length, l2, derive(seeds[(u, v)], 2)).positions()
        samp_u = xu[S2 - 1]
        samp_v = xv[S2 - 1]
        stage2[(u, v)] = (samp_u, samp_v, l2)
        ham_payload[(u, v)] = _bits_of_vec(samp_u)
        ham_payload[(v, u)] = _bits_of_vec(samp_v)
    if ham_payload:
        net.exchange(ham_payload, "buddy")
    for (u, v), (samp_u, samp_v, l2) in stage2.items():
        dist = int((samp_u != samp_v).sum())
        flags[(u, v)] = bool(dist < eps * l2)
    return flags


# -- almost-clique decomposition -----------------------------------------------

def _unevenness(g, v: int) -> float:
    dv = g.degree(v)
    du = g.degrees[g.neighbors[v]]
    return float((np.maximum(0, du - dv) / (du + 1.0)).sum())


def compute_acd(net, eps_acd: float, eps_spa: float,
                backend: Backend = Backend.IDEALIZED, nu: float = 0.1,
                params: SketchParams = SketchParams()) -> AcdLabels:
    """Label every node Sparse, Uneven, or Dense and group the dense nodes
    into almost-cliques.

    Buddy runs on every edge; nodes whose buddy edges cover a (1-eps_acd)
    fraction of their degree become dense candidates, and candidate
    components of the buddy graph become almost-cliques.  Components then
    verify the degree and member-adjacency bounds at the relaxed constant
    2 eps_acd through a two-hop aggregation rooted at the minimum-id
    member; failing components are demoted wholesale.  Demoted and
    non-candidate nodes compute their unevenness exactly from exchanged
    degrees: Uneven iff the unevenness reaches eps_spa d_v, else Sparse.
    """
    if not 0 < eps_acd <= 0.1:
        raise ValueError("eps_acd must be in (0, 0.1]")
    if not 0 < eps_spa < 1:
        raise ValueError("eps_spa must be in (0, 1)")
    g = net.graph
    flags = buddy(net, eps_acd, backend, nu=nu, params=params)
    buddy_deg = [0] * g.n
    for (u, v), f in flags.items():
        if f:
            buddy_deg[u] += 1
            buddy_deg[v] += 1
    cand = [v for v in range(g.n)
            if g.degree(v) > 0 and buddy_deg[v] >= (1 - eps_acd) * g.degree(v)]
    cand_set = set(cand)
    cand_adj: dict[int, list] = {v: [] for v in cand}
    for (u, v), f in flags.items():
        if f and u in cand_set and v in cand_set:
            cand_adj[u].append(v)
            cand_adj[v].append(u)

    id_bits = net.id_bits
    cbits = id_bits + 1
    cid = {v: v for v in cand}
    for _ in range(g.n):
        payload = {}
        for v in cand:
            for u in cand_adj[v]:
                payload[(v, u)] = Bits(cid[v], id_bits)
        if not payload:
            break
        net.exchange(payload, "acd")
        changed = False
        for v in cand:
            low = min([cid[v]] + [cid[u] for u in cand_adj[v]])
            if low < cid[v]:
                cid[v] = low
                changed = True
        if not changed:
            break

    members = set(cand)

    def membership_broadcast():
        payload = {}
        for v in sorted(members):
            for u in g.neighbors[v].tolist():
                payload[(v, u)] = Bits(cid[v], id_bits)
        if payload:
            net.exchange(payload, "acd")
        co = {v: [u for u in g.neighbors[v].tolist()
                  if u in members and cid[u] == cid[v]]
              for v in sorted(members)}
        return co

    co = membership_broadcast()
    # each member discovers which co-members sit next to the leader
    adj_m = {v: (cid[v] == v) or (cid[v] in co[v]) for v in sorted(members)}
    bit_payload = {}
    for v in sorted(members):
        for u in co[v]:
            bit_payload[(v, u)] = Bits(1 if adj_m[v] else 0, 1)
    if bit_payload:
        net.exchange(bit_payload, "acd")
    relay = {}
    for v in sorted(members):
        if adj_m[v]:
            continue
        routes = [u for u in co[v] if adj_m[u]]
        if routes:
            relay[v] = min(routes)
        else:
            members.discard(v)  # no two-hop route to the leader

    co = membership_broadcast()
    ncv = {v: len(co[v]) for v in members}

    # count members up the two-hop tree, then send |C| back down
    def aggregate_up(value_of, width):
        up1 = {}
        for v in sorted(members):
            if v in relay:
                up1[(v, relay[v])] = Bits(value_of(v), width)
        recv = {v: [] for v in members}
        if up1:
            net.exchange(up1, "acd")
            for (v, r), payload in up1.items():
                recv[r].append(payload.value)
        up2 = {}
        for v in sorted(members):
            m = cid[v]
            if v != m and adj_m[v]:
                up2[(v, m)] = Bits(value_of(v) + sum(recv[v]), width)
        at_leader = {v: [] for v in members}
        if up2:
            net.exchange(up2, "acd")
            for (v, m), payload in up2.items():
                at_leader[m].append(payload.value)
        return {m: value_of(m) + sum(at_leader[m])
                for m in sorted(members) if cid[m] == m}

    def broadcast_down(leader_value, width):
        down1 = {}
        for v in sorted(members):
            m = cid[v]
            if v != m and adj_m[v]:
                down1[(m, v)] = Bits(leader_value[m], width)
        got = dict(leader_value)
        if down1:
            net.exchange(down1, "acd")
            for (m, v), payload in down1.items():
                got[v] = payload.value
        down2 = {}
        for v in sorted(members):
            if v in relay:
                down2[(relay[v], v)] = Bits(got[relay[v]], width)
        if down2:
            net.exchange(down2, "acd")
            for (r, v), payload in down2.items():
                got[v] = payload.value
        return got

    sizes = aggregate_up(lambda v: 1, cbits)
    size_at = broadcast_down(sizes, cbits)
    viol = {}
    for v in sorted(members):
        c = size_at[v]
        ok3 = g.degree(v) <= (1 + 2 * eps_acd) * c
        ok4 = (1 + 2 * eps_acd) * ncv[v] >= c
        viol[v] = 0 if (ok3 and ok4) else 1
    viol_up = aggregate_up(lambda v: viol[v], cbits)
    discard = {m: 1 if c else 0 for m, c in viol_up.items()}
    discard_at = broadcast_down(discard, 1)
    for v in sorted(members):
        if discard_at[v]:
            members.discard(v)

    # degrees are known from buddy's opening exchange; unevenness is exact
    role = {}
    clique_id = {}
    for v in range(g.n):
        if v in members:
            role[v] = NodeRole.DENSE
            clique_id[v] = cid[v]
        elif g.degree(v) == 0:
            role[v] = NodeRole.SPARSE
        elif _unevenness(g, v) >= eps_spa * g.degree(v):
            role[v] = NodeRole.UNEVEN
        else:
            role[v] = NodeRole.SPARSE
    return AcdLabels(role, clique_id, eps_acd, eps_spa)
