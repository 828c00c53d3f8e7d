import math

import numpy as np
import pytest

from congestcolor import generators as gen
from congestcolor import oracle
from congestcolor.runtime import Graph


def test_m_of_set_and_dual_route():
    g = gen.gnp(60, 0.2, seed=3)
    for v in range(0, 60, 7):
        nbrs = g.neighbors[v].tolist()
        direct = oracle.m_of_set(g, nbrs)
        pair_scan = sum(1 for i, u in enumerate(nbrs) for w in nbrs[i + 1:]
                        if g.has_edge(u, w))
        assert direct == pair_scan
        # m(N(v)) also equals half the sum over u in N(v) of |N(u) ∩ N(v)|
        total = sum(oracle.neighborhood_similarity(g, u, v) for u in nbrs)
        assert direct == total // 2 and total % 2 == 0


def test_sparsity_on_clique_is_zero():
    g = gen.clique(10)
    for v in range(10):
        assert oracle.local_sparsity(g, v) == 0.0
        assert oracle.global_sparsity(g, v) == 0.0


def test_sparsity_on_star_matches_formula():
    g = gen.star(11)  # center degree 10, leaves degree 1
    # center: no edges among leaves, d=10 -> (C(10,2) - 0)/10 = 4.5
    assert oracle.local_sparsity(g, 0) == pytest.approx(4.5)
    # leaf: single neighbor, C(1,2) = 0 edges -> 0
    assert oracle.local_sparsity(g, 1) == 0.0
    assert oracle.global_sparsity(g, 1) == pytest.approx(math.comb(10, 2) / 10)


def test_disparity_and_discrepancy():
    palettes = [[1, 2, 3], [3, 4, 5], [1, 2, 3]]
    g = gen.path(3)
    assert oracle.disparity(palettes, 0, 1) == pytest.approx(2 / 3)
    assert oracle.disparity(palettes, 1, 0) == pytest.approx(2 / 3)
    assert oracle.disparity(palettes, 2, 1) == pytest.approx(2 / 3)
    assert oracle.discrepancy(g, palettes, 1) == pytest.approx(4 / 3)
    assert oracle.slackability(g, palettes, 1) == pytest.approx(
        oracle.local_sparsity(g, 1) + 4 / 3)


def test_unevenness():
    g = gen.star(5)
    # leaves see the center of degree 4: (4-1)/(4+1)
    assert oracle.unevenness(g, 1) == pytest.approx(3 / 5)
    assert oracle.unevenness(g, 0) == 0.0


def test_external_and_anti_degree():
    g, blocks = gen.disjoint_cliques([4, 3])
    clique_of = {v: i for i, ids in enumerate(blocks) for v in ids}
    assert oracle.external_degree(g, clique_of, 0) == 0
    assert oracle.anti_degree(g, blocks[0], 0) == 0
    # remove membership of node 3 from clique 0's view
    assert oracle.anti_degree(g, [0, 1, 2, 6], 0) == 1  # 6 not adjacent


def test_triangle_and_c4_counts():
    g = gen.planted_triangle_neighborhood(20, 30, seed=5)
    assert oracle.m_of_set(g, g.neighbors[0]) == 30
    tri = oracle.triangles_per_edge(g)
    assert sum(tri[(min(0, u), max(0, u))] for u in range(1, 21)) == 2 * 30

    g4 = gen.planted_c4_neighborhood(12, 9, seed=5)
    assert oracle.c4_through_node(g4, 0) == 9
    # a clique K4 contains 3 distinct 4-cycles through each node
    assert oracle.c4_through_node(gen.clique(4), 0) == 3


def test_check_coloring():
    g = gen.path(3)
    palettes = [[1, 2], [2, 3], [1, 2]]
    assert oracle.check_coloring(g, [1, 2, 1], palettes) == []
    assert any("uncolored" in p
               for p in oracle.check_coloring(g, [1, None, 1], palettes))
    assert any("monochromatic" in p
               for p in oracle.check_coloring(g, [2, 2, 1], palettes))
    assert any("outside its palette" in p
               for p in oracle.check_coloring(g, [9, 2, 1], palettes))


def test_check_acd_on_planted_instance():
    g, blocks = gen.disjoint_cliques([8, 8])
    roles = {v: "dense" for v in range(16)}
    clique_of = {v: i for i, ids in enumerate(blocks) for v in ids}
    assert oracle.check_acd(g, roles, clique_of, 0.2, 0.2) == {}
    # mislabeling a dense clique node as sparse gets flagged
    roles[0] = "sparse"
    bad = oracle.check_acd(g, roles, clique_of, 0.2, 0.2)
    assert 0 in bad and "sparsity" in bad[0][0]


def test_generator_shapes():
    g, blocks = gen.planted_acd(3, 10, 0.1, 20, 0.1, 2, seed=9)
    assert g.n == 50
    assert [len(b) for b in blocks] == [10, 10, 10]
    t = gen.random_tree(40, seed=2)
    assert t.m == 39
    r = gen.gnp(100, 0.05, seed=4)
    assert 0 < r.m < 100 * 99 / 2 * 0.2
    with pytest.raises(ValueError):
        gen.planted_triangle_neighborhood(5, 11, seed=1)
    with pytest.raises(ValueError):
        gen.planted_c4_neighborhood(4, 7, seed=1)


def test_palette_generators():
    g = gen.gnp(50, 0.1, seed=1)
    pals = gen.palettes_random(g, seed=2)
    for v in range(g.n):
        assert len(pals[v]) == g.degree(v) + 1
        assert len(set(pals[v])) == len(pals[v])
    shared = gen.palettes_shared_prefix(g)
    assert shared[0] == list(range(1, g.degree(0) + 2))
    wide = gen.palettes_wide(g, seed=3, colorspace_bits=96)
    assert all(max(p) < (1 << 96) for p in wide)
    assert any(max(p) > (1 << 64) for p in wide)
