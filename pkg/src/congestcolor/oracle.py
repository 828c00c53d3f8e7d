"""Exact reference computations for everything the protocols estimate.

All functions here are centralized brute-force calculations on the whole
graph; the distributed code is tested against them.  Quantities:

* m(S): edges inside a node set S
* global/local sparsity of a node
* disparity, discrepancy, unevenness, slackability (sparsity + discrepancy)
* external degree, anti-degree, in-clique sparsity of dense nodes
* per-edge triangle counts and per-node 4-cycle counts
* proper/list-valid coloring verification
* almost-clique-decomposition property checks
"""

from __future__ import annotations

import math

import numpy as np

from .runtime import Graph


def m_of_set(g: Graph, S) -> int:
    """Number of edges of g with both endpoints in S."""
    members = np.zeros(g.n, dtype=bool)
    idx = np.fromiter((int(x) for x in S), dtype=np.int64)
    if idx.size == 0:
        return 0
    members[idx] = True
    total = 0
    for u in idx.tolist():
        total += int(members[g.neighbors[u]].sum())
    return total // 2


def neighborhood_similarity(g: Graph, u: int, v: int) -> int:
    """|N(u) ∩ N(v)| (for an edge, the number of triangles through it)."""
    return int(np.intersect1d(g.neighbors[u], g.neighbors[v],
                              assume_unique=True).size)


def global_sparsity(g: Graph, v: int) -> float:
    delta = g.max_degree()
    if delta == 0:
        return 0.0
    return (math.comb(delta, 2) - m_of_set(g, g.neighbors[v])) / delta


def local_sparsity(g: Graph, v: int) -> float:
    d = g.degree(v)
    if d == 0:
        return 0.0
    return (math.comb(d, 2) - m_of_set(g, g.neighbors[v])) / d


def disparity(palettes, u: int, v: int) -> float:
    pu, pv = set(palettes[u]), set(palettes[v])
    if not pu:
        return 0.0
    return len(pu - pv) / len(pu)


def discrepancy(g: Graph, palettes, v: int) -> float:
    return sum(disparity(palettes, u, v) for u in g.neighbors[v].tolist())


def unevenness(g: Graph, v: int) -> float:
    dv = g.degree(v)
    return sum(max(0, g.degree(u) - dv) / (g.degree(u) + 1)
               for u in g.neighbors[v].tolist())


def slackability(g: Graph, palettes, v: int) -> float:
    return local_sparsity(g, v) + discrepancy(g, palettes, v)


def clique_slackability(g: Graph, palettes, members) -> float:
    return min(slackability(g, palettes, v) for v in members)


def external_degree(g: Graph, clique_of: dict, v: int) -> int:
    """Neighbors of v outside v's own almost-clique."""
    own = clique_of.get(v)
    return sum(1 for u in g.neighbors[v].tolist() if clique_of.get(u) != own)


def anti_degree(g: Graph, members, v: int) -> int:
    """Members of v's almost-clique that are not v and not adjacent to v."""
    nbrs = set(g.neighbors[v].tolist())
    return sum(1 for u in members if u != v and u not in nbrs)


def in_clique_sparsity(g: Graph, members, v: int) -> float:
    """Sparsity of v computed from in-clique neighborhood edges only."""
    d = g.degree(v)
    if d == 0:
        return 0.0
    nc = [u for u in g.neighbors[v].tolist() if u in set(members)]
    return (math.comb(d, 2) - m_of_set(g, nc)) / d


def triangles_per_edge(g: Graph) -> dict[tuple[int, int], int]:
    return {(int(u), int(v)): neighborhood_similarity(g, int(u), int(v))
            for u, v in g.edges.tolist()}


def c4_through_node(g: Graph, v: int) -> int:
    """Number of 4-cycles of g that contain v.

    Every such cycle is v-u-x-w with u, w distinct neighbors of v and x a
    common neighbor of u and w other than v; each cycle corresponds to
    exactly one unordered pair {u, w}.
    """
    nbrs = g.neighbors[v].tolist()
    total = 0
    for i in range(len(nbrs)):
        for j in range(i + 1, len(nbrs)):
            common = neighborhood_similarity(g, nbrs[i], nbrs[j])
            total += max(0, common - 1)  # v itself is always common
    return total


def check_coloring(g: Graph, colors, palettes) -> list[str]:
    """Violations of completeness, properness, and list-validity."""
    problems = []
    for v in range(g.n):
        c = colors[v]
        if c is None:
            problems.append(f"node {v} uncolored")
            continue
        if c not in set(palettes[v]):
            problems.append(f"node {v} wears color {c} outside its palette")
    for u, v in g.edges.tolist():
        if colors[u] is not None and colors[u] == colors[v]:
            problems.append(f"edge ({u},{v}) monochromatic in color {colors[u]}")
    return problems


def check_acd(g: Graph, roles: dict, clique_of: dict, eps_acd: float,
              eps_spa: float) -> dict[int, list[str]]:
    """Per-node violations of the decomposition properties.

    Sparse nodes must be eps_spa*d_v-sparse, uneven nodes eps_spa*d_v-
    uneven, and each dense node v of clique C must satisfy the two size
    bounds d_v <= (1+eps_acd)|C| and (1+eps_acd)|N_C(v)| >= |C|.
    """
    members: dict[int, list[int]] = {}
    for v, cid in clique_of.items():
        members.setdefault(cid, []).append(v)
    out: dict[int, list[str]] = {}

    def note(v, msg):
        out.setdefault(v, []).append(msg)

    for v in range(g.n):
        role = roles[v]
        if role == "sparse":
            if local_sparsity(g, v) < eps_spa * g.degree(v):
                note(v, "sparse node below the sparsity bar")
        elif role == "uneven":
            if unevenness(g, v) < eps_spa * g.degree(v):
                note(v, "uneven node below the unevenness bar")
        elif role == "dense":
            cid = clique_of[v]
            C = members[cid]
            size = len(C)
            if g.degree(v) > (1 + eps_acd) * size:
                note(v, "degree exceeds (1+eps)|C|")
            cset = set(C)
            nc = sum(1 for u in g.neighbors[v].tolist() if u in cset)
            if (1 + eps_acd) * nc < size:
                note(v, "too few in-clique neighbors")
        else:
            note(v, f"unknown role {role!r}")
    return out
