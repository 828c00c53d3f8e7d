"""Seeded graph and palette builders for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .runtime import Graph


def clique(k: int) -> Graph:
    return Graph.from_edge_list(k, [(i, j) for i in range(k)
                                    for j in range(i + 1, k)])


def disjoint_cliques(sizes) -> tuple[Graph, list[list[int]]]:
    """Union of cliques; returns the graph and the member lists."""
    edges = []
    blocks = []
    base = 0
    for s in sizes:
        ids = list(range(base, base + s))
        blocks.append(ids)
        edges.extend((ids[i], ids[j]) for i in range(s) for j in range(i + 1, s))
        base += s
    return Graph.from_edge_list(base, edges), blocks


def star(n: int) -> Graph:
    return Graph.from_edge_list(n, [(0, i) for i in range(1, n)])


def path(n: int) -> Graph:
    return Graph.from_edge_list(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n: int) -> Graph:
    return Graph.from_edge_list(n, [(i, (i + 1) % n) for i in range(n)])


def random_tree(n: int, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    return Graph.from_edge_list(
        n, [(int(rng.integers(0, i)), i) for i in range(1, n)])


def gnp(n: int, p: float, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    edges = []
    for u in range(n - 1):
        hits = np.nonzero(rng.random(n - u - 1) < p)[0]
        edges.extend((u, u + 1 + int(j)) for j in hits)
    return Graph.from_edge_list(n, edges)


def power_law(n: int, exponent: float, avg_degree: float, seed: int) -> Graph:
    """Chung-Lu random graph with weights w_v ~ (v + 1)^(-1/(exponent - 1)),
    rescaled so the expected average degree is ``avg_degree``."""
    if exponent <= 2.0:
        raise ValueError("exponent must exceed 2")
    rng = np.random.default_rng(seed)
    w = (np.arange(1, n + 1, dtype=float)) ** (-1.0 / (exponent - 1.0))
    w *= avg_degree * n / w.sum()
    total = w.sum()
    edges = []
    for u in range(n - 1):
        p = np.minimum(1.0, w[u] * w[u + 1:] / total)
        hits = np.nonzero(rng.random(n - u - 1) < p)[0]
        edges.extend((u, u + 1 + int(j)) for j in hits)
    return Graph.from_edge_list(n, edges)


def planted_acd(n_cliques: int, clique_size: int, missing_frac: float,
                n_shell: int, shell_p: float, bridges_per_clique: int,
                seed: int) -> tuple[Graph, list[list[int]]]:
    """Near-cliques plus a sparse shell, joined by a few bridge edges.

    Each planted block is a clique with a ``missing_frac`` fraction of its
    internal edges removed.  Shell nodes form a sparse random graph and
    each block sends a handful of bridge edges into the shell.  Returns
    the graph and the planted block memberships.
    """
    rng = np.random.default_rng(seed)
    edges = set()
    blocks = []
    base = 0
    for _ in range(n_cliques):
        ids = list(range(base, base + clique_size))
        blocks.append(ids)
        pairs = [(ids[i], ids[j]) for i in range(clique_size)
                 for j in range(i + 1, clique_size)]
        keep = rng.random(len(pairs)) >= missing_frac
        edges.update(p for p, k in zip(pairs, keep) if k)
        base += clique_size
    shell = list(range(base, base + n_shell))
    for i, u in enumerate(shell):
        hits = np.nonzero(rng.random(len(shell) - i - 1) < shell_p)[0]
        edges.update((u, shell[i + 1 + int(j)]) for j in hits)
    if shell:
        for ids in blocks:
            for _ in range(bridges_per_clique):
                u = ids[int(rng.integers(0, len(ids)))]
                w = shell[int(rng.integers(0, len(shell)))]
                edges.add((min(u, w), max(u, w)))
    return Graph.from_edge_list(base + n_shell, sorted(edges)), blocks


def planted_triangle_neighborhood(delta: int, m_internal: int,
                                  seed: int) -> Graph:
    """Star around node 0 with ``m_internal`` edges inside the leaf set.

    m(N(0)) = m_internal exactly, so node 0 sits on that many triangles.
    """
    if m_internal > delta * (delta - 1) // 2:
        raise ValueError("more internal edges than leaf pairs")
    rng = np.random.default_rng(seed)
    edges = [(0, i) for i in range(1, delta + 1)]
    pairs = [(i, j) for i in range(1, delta + 1)
             for j in range(i + 1, delta + 1)]
    pick = rng.choice(len(pairs), size=m_internal, replace=False)
    edges.extend(pairs[int(i)] for i in pick)
    return Graph.from_edge_list(delta + 1, edges)


def planted_c4_neighborhood(delta: int, n_cycles: int, seed: int) -> Graph:
    """Node 0 with ``delta`` neighbors and ~``n_cycles`` 4-cycles through it.

    Each cycle comes from an apex node adjacent to one distinct leaf pair;
    distinct apexes create no extra common neighbors, so the count is
    exact.
    """
    max_pairs = delta * (delta - 1) // 2
    if n_cycles > max_pairs:
        raise ValueError("more cycles than leaf pairs")
    rng = np.random.default_rng(seed)
    edges = [(0, i) for i in range(1, delta + 1)]
    pairs = [(i, j) for i in range(1, delta + 1)
             for j in range(i + 1, delta + 1)]
    pick = rng.choice(max_pairs, size=n_cycles, replace=False)
    apex = delta + 1
    for i in pick:
        u, w = pairs[int(i)]
        edges.append((u, apex))
        edges.append((w, apex))
        apex += 1
    return Graph.from_edge_list(apex, edges)


def palettes_random(g: Graph, seed: int, spread: int = 4,
                    extra: int = 0) -> list[list[int]]:
    """Per-node lists of d_v+1+extra distinct colors from a shared space."""
    rng = np.random.default_rng(seed)
    space = spread * (g.max_degree() + 1) + extra
    out = []
    for v in range(g.n):
        need = g.degree(v) + 1 + extra
        out.append(sorted(int(c) + 1 for c in
                          rng.choice(space, size=need, replace=False)))
    return out


def palettes_shared_prefix(g: Graph, extra: int = 0) -> list[list[int]]:
    """Everyone draws from the same low colors: maximum contention."""
    return [list(range(1, g.degree(v) + 2 + extra)) for v in range(g.n)]


def palettes_wide(g: Graph, seed: int, colorspace_bits: int,
                  extra: int = 0) -> list[list[int]]:
    """Palettes from a huge color space (tests the large-color machinery)."""
    rng = np.random.default_rng(seed)
    words = (colorspace_bits + 31) // 32
    out = []
    top = 1 << colorspace_bits
    for v in range(g.n):
        need = g.degree(v) + 1 + extra
        cols = set()
        while len(cols) < need:
            acc = 0
            for w in rng.integers(0, 1 << 32, size=words, dtype=np.uint64):
                acc = (acc << 32) | int(w)
            cols.add(acc % (top - 1) + 1)
        out.append(sorted(cols))
    return out
