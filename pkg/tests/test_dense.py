"""Tests for the almost-clique machinery: leaders, partitions, put-aside
sets, the synchronized trial, and relay coloring."""

from __future__ import annotations

import math
import random
from itertools import combinations

import pytest

from congestcolor import oracle
from congestcolor.coloring import (ColoringState, announce_color_hash_setup,
                                   slack_generation, try_color,
                                   try_random_color)
from congestcolor.dense import (CliqueInfo, DenseParams, SlackClass,
                                anti_degree, build_cliques, chromatic_slack,
                                classify_slackability, color_put_aside,
                                ell_of, ext_degree, partition_inliers_outliers,
                                put_aside, relay_intervals, select_leader,
                                synch_color_trial)
from congestcolor.generators import (clique, disjoint_cliques, gnp,
                                     palettes_random, palettes_shared_prefix,
                                     star)
from congestcolor.runtime import Graph, Network


def dense_stack(g, palettes, clique_of, seed, params=None, p_gen=0.0, mult=4):
    """Run setup, optional slack generation, and the clique pipeline through
    the inlier partition.  Returns (net, state, cliques)."""
    net = Network(g, seed, bandwidth_mult=mult)
    state = ColoringState(net, palettes)
    announce_color_hash_setup(net, state)
    if p_gen:
        slack_generation(net, state, p_gen=p_gen)
    cliques = build_cliques(net, clique_of, params)
    select_leader(net, state, cliques.values(), clique_of)
    classify_slackability(net, state, cliques.values(), clique_of, params)
    partition_inliers_outliers(net, state, cliques.values())
    return net, state, cliques


def two_cliques_with_bridges(k=20, bridges=10):
    edges = list(combinations(range(k), 2))
    edges += [(k + u, k + v) for u, v in combinations(range(k), 2)]
    edges += [(i, k + i) for i in range(bridges)]
    g = Graph.from_edge_list(2 * k, edges)
    clique_of = {v: 0 for v in range(k)}
    clique_of.update({k + v: 1 for v in range(k)})
    return g, clique_of


def color_rest(net, state, keep):
    """Randomly color every node outside `keep`; palettes here always leave
    pigeonhole room, so a few rounds suffice."""
    for _ in range(100):
        rest = [v for v in state.uncolored() if v not in keep]
        if not rest:
            return
        try_random_color(net, state, rest)
    raise AssertionError("non-put-aside nodes did not finish coloring")


def test_ell_threshold_scale():
    assert ell_of(2) == 4
    assert ell_of(0) == 4
    assert ell_of(1024) == math.ceil(10.0 ** 2.1)
    assert ell_of(1024, override=7) == 7


def test_build_cliques_and_count_exactness():
    g, clique_of = two_cliques_with_bridges()
    net = Network(g, 3, bandwidth_mult=4)
    cliques = build_cliques(net, clique_of)
    assert set(cliques) == {0, 1}
    assert cliques[0].members == list(range(20))
    assert cliques[1].members == list(range(20, 40))
    assert cliques[0].delta_c == 20 and cliques[1].delta_c == 20
    assert cliques[0].ell == ell_of(20)
    for cid, c in cliques.items():
        for v in c.members:
            assert ext_degree(net, clique_of, v) == \
                oracle.external_degree(g, clique_of, v)
            assert anti_degree(net, c, v) == \
                oracle.anti_degree(g, c.members, v)


def test_chromatic_slack_counts_foreign_colors():
    g = star(4)
    palettes = [[1, 2, 3, 4], [10, 11], [20, 21], [30, 31]]
    net = Network(g, 11)
    state = ColoringState(net, palettes)
    announce_color_hash_setup(net, state)
    res = try_color(net, state, {1: 10, 2: 20, 3: 30})
    assert all(res.values())
    assert chromatic_slack(state, 0) == 3

    g2 = clique(3)
    net2 = Network(g2, 12)
    state2 = ColoringState(net2, [[1, 2, 3]] * 3)
    announce_color_hash_setup(net2, state2)
    assert try_color(net2, state2, {0: 2}) == {0: True}
    assert chromatic_slack(state2, 1) == 0
    assert chromatic_slack(state2, 2) == 0


def test_select_leader_min_aggregate_ties_by_id():
    g = clique(5)
    net, state, cliques = dense_stack(
        g, palettes_shared_prefix(g), {v: 0 for v in range(5)}, 4)[0:3]
    assert cliques[0].leader == 0

    # ten pendants hang off node 0, so its external degree disqualifies it
    edges = list(combinations(range(12), 2)) + [(0, 12 + i) for i in range(10)]
    g = Graph.from_edge_list(22, edges)
    clique_of = {v: 0 for v in range(12)}
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      clique_of, 5)
    c = cliques[0]
    assert c.leader == 1
    best = min((ext_degree(net, clique_of, v) + anti_degree(net, c, v)
                + chromatic_slack(state, v), v) for v in c.members)
    assert c.leader == best[1]


def test_select_leader_lands_in_slackful_group():
    # 25 members share one palette; 5 carry disjoint palettes and thus see
    # the whole clique as discrepancy.  A good leader has near-minimal
    # clique slackability.
    g = clique(30)
    shared = list(range(1, 32))
    palettes = [list(shared) for _ in range(25)]
    palettes += [list(range(1000 + 50 * i, 1031 + 50 * i)) for i in range(5)]
    clique_of = {v: 0 for v in range(30)}
    sigma_c = oracle.clique_slackability(g, palettes, list(range(30)))
    hits = 0
    for seed in range(40):
        net, state, cliques = dense_stack(g, palettes, clique_of, seed,
                                          p_gen=0.25)
        lead = cliques[0].leader
        if oracle.slackability(g, palettes, lead) <= 2 * sigma_c + 1e-9:
            hits += 1
    assert hits >= 38


def test_classify_exact_zero_on_perfect_clique():
    g = clique(12)
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      {v: 0 for v in range(12)}, 6)
    c = cliques[0]
    assert c.slack_class is SlackClass.LOW
    assert c.slackability_estimate == 0.0
    assert oracle.local_sparsity(g, c.leader) == 0.0


def test_classify_high_matches_sparsity_oracle():
    # remove half the edges not touching node 0: zeta_0 = 1580/79 = 20
    pairs = list(combinations(range(1, 80), 2))
    random.Random(7).shuffle(pairs)
    removed = set(pairs[:1580])
    edges = [e for e in combinations(range(80), 2) if e not in removed]
    g = Graph.from_edge_list(80, edges)
    clique_of = {v: 0 for v in range(80)}
    params = DenseParams(ell_override=4)
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      clique_of, 8, params=params)
    c = cliques[0]
    assert c.leader == 0
    assert c.slackability_estimate == pytest.approx(20.0)
    assert c.slackability_estimate == pytest.approx(
        oracle.local_sparsity(g, 0))
    assert c.slack_class is SlackClass.HIGH


def test_classify_estimate_bounded_by_external_degree():
    g, clique_of = two_cliques_with_bridges()
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      clique_of, 9)
    for c in cliques.values():
        x = c.leader
        zeta = oracle.local_sparsity(g, x)
        e_x = oracle.external_degree(g, clique_of, x)
        zeta_hat = c.slackability_estimate - e_x  # no colors, kappa = 0
        assert zeta - 1e-9 <= zeta_hat <= zeta + e_x + 1e-9


def test_partition_exact_quota_on_perfect_clique():
    g = clique(10)
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      {v: 0 for v in range(10)}, 10)
    c = cliques[0]
    assert c.leader == 0
    assert c.outliers == [1, 2, 3, 4]
    assert c.inliers == [0, 5, 6, 7, 8, 9]


def test_partition_anti_neighbor_is_outlier():
    # K_10 missing (0, 9); pendants on 1..8 equalize the leader aggregates
    # so node 0 wins the tie and 9 is its anti-neighbor.
    edges = [e for e in combinations(range(10), 2) if e != (0, 9)]
    edges += [(v, 9 + v) for v in range(1, 9)]
    g = Graph.from_edge_list(18, edges)
    clique_of = {v: 0 for v in range(10)}
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      clique_of, 13)
    c = cliques[0]
    assert c.leader == 0
    assert 9 in c.outliers
    assert c.outliers == [1, 2, 3, 4, 9]


def test_partition_rules_recomputed_from_adjacency():
    g = clique(30)
    pairs = [e for e in combinations(range(5, 30), 2)]
    random.Random(21).shuffle(pairs)
    removed = set(pairs[:40])
    edges = [e for e in combinations(range(30), 2) if e not in removed]
    g = Graph.from_edge_list(30, edges)
    clique_of = {v: 0 for v in range(30)}
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      clique_of, 14)
    c = cliques[0]
    x = c.leader
    assert x == 0

    x_nbrs = {int(u) for u in g.neighbors[x]}
    rest = [v for v in c.members if v != x]
    common = {v: sum(1 for t in g.neighbors[v] if int(t) in x_nbrs)
              for v in rest}
    k1 = math.ceil(max(g.degree(x), len(c.members)) / 3)
    k2 = math.ceil(len(c.members) / 6)
    fewest = sorted(rest, key=lambda v: (common[v], v))[:k1]
    largest = sorted(rest, key=lambda v: (-g.degree(v), v))[:k2]
    anti = [v for v in rest if v not in x_nbrs]
    assert c.outliers == sorted(set(fewest) | set(largest) | set(anti))

    cut = sorted(common[v] for v in rest)[k1 - 1]
    for v in c.inliers:
        if v == x:
            continue
        assert g.has_edge(x, v)
        assert common[v] >= cut


def test_put_aside_cross_clique_pairs_withdraw():
    g, clique_of = two_cliques_with_bridges()
    params = DenseParams(ell_override=100)  # p clamps to 1: all core sampled
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      clique_of, 17, params=params)
    res = put_aside(net, state, cliques.values(), clique_of, params)
    # leaders are 10 and 30; cores are {7..19} and {27..39}; the bridged
    # members 7, 8, 9 (and 27, 28, 29) all sample and mutually withdraw
    assert cliques[0].leader == 10 and cliques[1].leader == 30
    assert res[0] == list(range(11, 20))
    assert res[1] == list(range(31, 40))
    for u in res[0]:
        for v in res[1]:
            assert not g.has_edge(u, v)
    for cid, c in cliques.items():
        assert c.leader not in c.put_aside
        assert set(c.put_aside) <= set(c.core_members)


def test_put_aside_no_external_edges_keeps_sample():
    g, blocks = disjoint_cliques([20, 20])
    clique_of = {v: cid for cid, mem in enumerate(blocks) for v in mem}
    params = DenseParams(ell_override=100)
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      clique_of, 18, params=params)
    res = put_aside(net, state, cliques.values(), clique_of, params)
    assert res[0] == list(range(8, 20))
    assert res[1] == list(range(28, 40))


def test_put_aside_trims_to_smallest_ids():
    g = clique(20)
    params = DenseParams(c_pa=0.08, ell_override=100)
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g),
                                      {v: 0 for v in range(20)}, 19,
                                      params=params)
    res = put_aside(net, state, cliques.values(),
                    {v: 0 for v in range(20)}, params)
    core = cliques[0].core_members
    expect = sorted(v for v in core if v != cliques[0].leader)[:8]
    assert res[0] == expect and len(res[0]) == 8


def test_synch_trial_perfect_clique_colors_everyone():
    g = clique(10)
    net, state, cliques = dense_stack(g, palettes_shared_prefix(g, extra=5),
                                      {v: 0 for v in range(10)}, 23)
    res = synch_color_trial(net, state, cliques.values())
    assert res and all(res.values())
    core = cliques[0].inliers
    assert all(state.nodes[v].color is not None for v in core)
    assert state.proper() and state.list_valid()


def test_synch_trial_skips_member_without_preimage():
    g = clique(10)
    palettes = [list(range(1, 16)) for _ in range(10)]
    palettes[8] = list(range(101, 116))
    net, state, cliques = dense_stack(g, palettes,
                                      {v: 0 for v in range(10)}, 24)
    assert 8 in cliques[0].inliers
    synch_color_trial(net, state, cliques.values())
    assert state.nodes[8].color is None
    others = [v for v in cliques[0].inliers if v != 8]
    assert all(state.nodes[v].color is not None for v in others)
    assert state.proper()


def test_synch_trial_leaves_few_uncolored_inliers():
    # residual uncolored inliers stay below c*(sigma_C + ell), c = 2
    clique_of = {v: 0 for v in range(32)}
    params = DenseParams(ell_override=4)
    g = clique(32)
    members = list(range(32))

    shared = palettes_shared_prefix(g)
    mixed = [list(p) for p in shared]
    for i in range(4):  # high ids stay inliers; their palettes are foreign
        mixed[28 + i] = list(range(2000 + 40 * i, 2033 + 40 * i))

    for palettes, p_gen in ((shared, 0.25), (mixed, 0.0)):
        sigma_c = oracle.clique_slackability(g, palettes, members)
        bound = 2 * (sigma_c + 4)
        hits = 0
        for seed in range(40):
            net, state, cliques = dense_stack(g, palettes, clique_of,
                                              100 + seed, params=params,
                                              p_gen=p_gen)
            c = cliques[0]
            assert bound < len(c.core(state))  # the check is not vacuous
            synch_color_trial(net, state, [c])
            if len(c.core(state)) <= bound:
                hits += 1
            assert state.proper()
        assert hits >= 38


def test_relay_intervals_disjoint_blocks():
    core = list(range(10, 31))
    blocks = relay_intervals(core, 3)
    assert blocks == [core[0:7], core[7:14], core[14:21]]
    assert relay_intervals(core, 1) == [core[0:3]]


def test_color_put_aside_single_node():
    g = clique(20)
    net, state, cliques = dense_stack(g, palettes_random(g, 31, extra=25),
                                      {v: 0 for v in range(20)}, 31)
    c = cliques[0]
    assert 19 in c.inliers
    c.core_members = sorted(c.core(state))
    c.put_aside = [19]
    color_rest(net, state, {19})
    lowest = min(state.nodes[19].palette)
    deferred = color_put_aside(net, state, [c])
    assert deferred == set()
    assert state.nodes[19].color == lowest
    assert state.proper() and state.complete()


def test_color_put_aside_adjacent_triple_distinct():
    g = clique(50)
    net, state, cliques = dense_stack(g, palettes_random(g, 32, extra=40),
                                      {v: 0 for v in range(50)}, 32)
    c = cliques[0]
    assert {47, 48, 49} <= set(c.inliers)
    c.core_members = sorted(c.core(state))
    assert len(c.core_members) >= 2 * 9 + 3
    c.put_aside = [47, 48, 49]
    color_rest(net, state, {47, 48, 49})
    deferred = color_put_aside(net, state, [c])
    assert deferred == set()
    got = [state.nodes[v].color for v in (47, 48, 49)]
    assert None not in got and len(set(got)) == 3
    assert state.proper() and state.complete() and state.list_valid()


def test_color_put_aside_relay_shortage_defers():
    # hub 0 reaches everyone; 13 has one relay candidate in its interval
    # but needs two, while 14 has enough.
    edges = [(0, i) for i in range(1, 15)]
    edges += [(1, 13), (13, 14), (6, 14), (7, 14)]
    g = Graph.from_edge_list(15, edges)
    palettes = [list(range(100 * v + 1, 100 * v + 3 + g.degree(v)))
                for v in range(15)]
    net = Network(g, 33, bandwidth_mult=4)
    state = ColoringState(net, palettes)
    announce_color_hash_setup(net, state)
    res = try_color(net, state, {v: palettes[v][0] for v in range(13)})
    assert all(res.values())
    c = CliqueInfo(0, list(range(15)), 14, 4, leader=0,
                   inliers=list(range(15)), put_aside=[13, 14],
                   core_members=list(range(1, 11)))
    deferred = color_put_aside(net, state, [c])
    assert deferred == {13}
    assert state.nodes[13].color is None
    assert state.nodes[14].color is not None
    assert state.proper()


def test_color_put_aside_small_core_defers_all():
    g = clique(8)
    palettes = [list(range(20 * v + 1, 20 * v + 10)) for v in range(8)]
    net = Network(g, 34, bandwidth_mult=4)
    state = ColoringState(net, palettes)
    announce_color_hash_setup(net, state)
    res = try_color(net, state, {v: palettes[v][0] for v in range(6)})
    assert all(res.values())
    c = CliqueInfo(0, list(range(8)), 7, 4, leader=0,
                   inliers=list(range(8)), put_aside=[6, 7],
                   core_members=[1, 2, 3])
    before = net.stats().rounds_used
    deferred = color_put_aside(net, state, [c])
    assert deferred == {6, 7}
    assert state.nodes[6].color is None and state.nodes[7].color is None
    assert net.stats().rounds_used == before
