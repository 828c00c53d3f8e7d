"""Palette state and the color-trial primitives.

Colors may live in a space far larger than the bandwidth, so no raw color
ever crosses an edge.  Each node announces a short ColorHash once, and from
then on every color sent to node v travels as an out_bits-wide value under
v's hash: conflict checks, palette pruning and adoption notices all operate
on hash images.  True equality always implies hash equality, so properness
is never at risk; a hash collision can only cause a spurious conflict or an
extra pruned color, both harmless at out_bits >= 6 log2 n.

Conflict priority: each node carries an integer priority class, and a try
by u conflicts with v's when priority[u] <= priority[v].  Equal classes are
symmetric (both colliding tries fail); lower classes win over higher ones.
Passive nodes (put-aside sets) neither try nor conflict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitio import Bits, BitWriter
from .hashing import (Backend, ColorHash, SamplerMultiset,
                      choose_low_collision_hash, make_color_hash, make_hash,
                      mix64)
from .runtime import Network

KIND_TRY = 0
KIND_VECTOR = 1
KIND_ADOPT = 2
KIND_CONTROL = 3

_MASK64 = (1 << 64) - 1


def _fold64(color: int) -> int:
    """Deterministic fold of an arbitrarily large color into 63 bits."""
    if color < (1 << 63):
        return color
    acc = 0x5EED
    while color:
        acc = mix64(acc ^ (color & _MASK64))
        color >>= 64
    return acc & ((1 << 63) - 1)


def log_star(y: float) -> int:
    s = 0
    while y > 1.0:
        y = math.log2(y)
        s += 1
    return s


def _tetrate(i: int, cap: int = 1 << 20) -> int:
    """2 ^^ i, saturating at cap."""
    x = 1
    for _ in range(i):
        if x >= 20:
            return cap
        x = 2 ** x
    return min(x, cap)


class NodeColorState:
    """Mutable coloring state of one node."""

    __slots__ = ("palette", "original", "color", "uncolored_degree",
                 "priority", "passive", "color_hash", "neighbor_color_hashes",
                 "_hash_cache")

    def __init__(self, palette: set[int], degree: int):
        self.palette = set(palette)
        self.original = frozenset(palette)
        self.color: int | None = None
        self.uncolored_degree = degree
        self.priority = 0
        self.passive = False
        self.color_hash: ColorHash | None = None
        self.neighbor_color_hashes: dict[int, int] = {}
        self._hash_cache: dict[int, int] = {}

    def slack(self) -> int:
        return len(self.palette) - self.uncolored_degree

    def announce_value(self, color: int) -> int:
        """h_v(color) under this node's announcement hash, cached."""
        v = self._hash_cache.get(color)
        if v is None:
            v = self.color_hash.eval(color)
            self._hash_cache[color] = v
        return v


class ColoringState:
    """Network-wide D1LC state: one NodeColorState per node."""

    def __init__(self, net: Network, palettes):
        g = net.graph
        if len(palettes) != g.n:
            raise ValueError("one palette per node required")
        self.net = net
        self.nodes: list[NodeColorState] = []
        space_bits = 1
        for v in range(g.n):
            pal = set(palettes[v])
            if len(pal) < g.degree(v) + 1:
                raise ValueError(f"palette of node {v} smaller than degree+1")
            if any(c < 0 for c in pal):
                raise ValueError("colors must be non-negative")
            space_bits = max(space_bits, max(c.bit_length() for c in pal))
            self.nodes.append(NodeColorState(pal, g.degree(v)))
        self.colorspace_bits = space_bits
        self.domain_bits = min(space_bits, 63)
        self.slack_gain: dict[int, int] | None = None

    # -- views ---------------------------------------------------------

    def uncolored(self) -> list[int]:
        return [v for v, nd in enumerate(self.nodes) if nd.color is None]

    def conflict_set(self, v: int) -> list[int]:
        """N+(v): neighbors whose tries conflict with v's."""
        pv = self.nodes[v].priority
        return [int(u) for u in self.net.graph.neighbors[v]
                if not self.nodes[u].passive and self.nodes[u].priority <= pv]

    def set_priority(self, classes: dict[int, int]) -> None:
        for v, p in classes.items():
            self.nodes[v].priority = int(p)

    def set_passive(self, nodes, flag: bool = True) -> None:
        for v in nodes:
            self.nodes[v].passive = flag

    def fold_palette(self, v: int) -> tuple[list[int], np.ndarray]:
        colors = sorted(self.nodes[v].palette)
        folds = np.fromiter((_fold64(c) for c in colors), dtype=np.uint64,
                            count=len(colors))
        return colors, folds

    # -- checks (test support; read raw colors, not hashes) -------------

    def proper(self) -> bool:
        g = self.net.graph
        for u, v in g.edges:
            cu, cv = self.nodes[u].color, self.nodes[v].color
            if cu is not None and cu == cv:
                return False
        return True

    def list_valid(self) -> bool:
        return all(nd.color is None or nd.color in nd.original
                   for nd in self.nodes)

    def complete(self) -> bool:
        return all(nd.color is not None for nd in self.nodes)

    def palette_invariant_holds(self) -> bool:
        return all(nd.color is not None
                   or len(nd.palette) >= nd.uncolored_degree + 1
                   for nd in self.nodes)


def _require_setup(state: ColoringState) -> None:
    if any(nd.color_hash is None for nd in state.nodes):
        raise RuntimeError("announce_color_hash_setup must run first")


def announce_color_hash_setup(net: Network, state: ColoringState, d: int = 6,
                              phase: str = "announce-hash") -> None:
    """Every node broadcasts its color-announcement hash to its neighbors."""
    if d < 6:
        raise ValueError("d must be at least 6")
    g = net.graph
    payloads = {}
    for v in range(g.n):
        spec = make_color_hash(state.colorspace_bits, g.n, d,
                               net.rng(v).next64())
        state.nodes[v].color_hash = spec
        state.nodes[v]._hash_cache = {}
        wire = BitWriter().put(KIND_CONTROL, 2).put_bits(spec.to_bits()).done()
        for u in g.neighbors[v]:
            payloads[(v, int(u))] = wire
    if payloads:
        net.exchange(payloads, phase)


def _apply_adoptions(net: Network, state: ColoringState,
                     adopts: dict[int, int], phase: str,
                     values_sent: dict[tuple[int, int], int] | None = None
                     ) -> None:
    """Winners broadcast their color (as receiver-hash values unless already
    sent this invocation) and every neighbor prunes its palette."""
    g = net.graph
    payloads = {}
    out_values = {}
    for v, c in sorted(adopts.items()):
        for u_ in g.neighbors[v]:
            u = int(u_)
            if values_sent is not None:
                value = values_sent[(v, u)]
                wire = BitWriter().put(KIND_ADOPT, 2).put(1, 1).done()
            else:
                value = state.nodes[u].announce_value(c)
                wire = BitWriter().put(KIND_ADOPT, 2).put(
                    value, state.nodes[u].color_hash.out_bits).done()
            out_values[(v, u)] = value
            payloads[(v, u)] = wire
    if payloads:
        net.exchange(payloads, phase)
    for v, c in adopts.items():
        state.nodes[v].color = c
    for (v, u), value in out_values.items():
        nu = state.nodes[u]
        nu.uncolored_degree -= 1
        nu.neighbor_color_hashes[v] = value
        nu.palette = {c2 for c2 in nu.palette
                      if nu.announce_value(c2) != value}


def try_color(net: Network, state: ColoringState, tries: dict[int, int],
              phase: str = "try-color") -> dict[int, bool]:
    """One synchronous round of color tries.

    A trier keeps its color iff no conflicting neighbor tried a hash-equal
    color; winners then broadcast, and all neighbors prune their palettes.
    """
    _require_setup(state)
    for v, c in tries.items():
        nd = state.nodes[v]
        if nd.color is not None:
            raise ValueError(f"node {v} is already colored")
        if c not in nd.palette:
            raise ValueError(f"color {c} not in the palette of node {v}")
    g = net.graph
    payloads = {}
    sent = {}
    for v, c in sorted(tries.items()):
        for u_ in g.neighbors[v]:
            u = int(u_)
            value = state.nodes[u].announce_value(c)
            sent[(v, u)] = value
            payloads[(v, u)] = BitWriter().put(KIND_TRY, 2).put(
                value, state.nodes[u].color_hash.out_bits).done()
    if payloads:
        net.exchange(payloads, phase)
    results = {}
    for v, c in tries.items():
        own = state.nodes[v].announce_value(c)
        results[v] = not any(u in tries and sent[(u, v)] == own
                             for u in self_conflicts(state, v, tries))
    adopts = {v: tries[v] for v, ok in results.items() if ok}
    _apply_adoptions(net, state, adopts, phase, values_sent=sent)
    return results


def self_conflicts(state: ColoringState, v: int, tries) -> list[int]:
    return [u for u in state.conflict_set(v) if u in tries]


def try_random_color(net: Network, state: ColoringState, nodes,
                     phase: str = "try-random") -> dict[int, bool]:
    """Each node tries a uniform element of its palette."""
    tries = {}
    for v in sorted(set(nodes)):
        nd = state.nodes[v]
        if nd.color is not None:
            continue
        if not nd.palette:
            raise ValueError(f"node {v} has an empty palette")
        tries[v] = net.rng(v).choice(sorted(nd.palette))
    return try_color(net, state, tries, phase)


def slack_generation(net: Network, state: ColoringState, participants=None,
                     p_gen: float = 0.1,
                     phase: str = "slack-generation") -> set[int]:
    """Each participant wakes w.p. p_gen and tries one random color.

    Records per-node slack gain on the state for identify_v_start.
    """
    if not 0.0 <= p_gen <= 1.0:
        raise ValueError("p_gen must be in [0, 1]")
    if participants is None:
        participants = state.uncolored()
    parts = [v for v in sorted(set(participants))
             if state.nodes[v].color is None]
    baseline = {v: state.nodes[v].slack() for v in state.uncolored()}
    awake = [v for v in parts if net.rng(v).random() < p_gen]
    results = try_random_color(net, state, awake, phase)
    state.slack_gain = {v: state.nodes[v].slack() - before
                        for v, before in baseline.items()
                        if state.nodes[v].color is None}
    return {v for v, ok in results.items() if ok}


def identify_v_start(net: Network, state: ColoringState,
                     eps_hat: float = 0.01,
                     phase: str = "v-start") -> tuple[set[int], set[int]]:
    """Split the slack-generation stragglers.

    A node that gained less than eps_hat*d_v permanent slack joins V_start
    when at least eps_hat*d_v uncolored neighbors did gain that much (of
    their own degree); otherwise it lands in the bad set for the fallback.
    """
    if state.slack_gain is None:
        raise RuntimeError("slack_generation must run before identify_v_start")
    g = net.graph
    gained = {}
    payloads = {}
    for v in state.uncolored():
        flag = state.slack_gain.get(v, 0) >= eps_hat * g.degree(v)
        gained[v] = flag
        wire = BitWriter().put(KIND_CONTROL, 2).put(int(flag), 1).done()
        for u_ in g.neighbors[v]:
            payloads[(v, int(u_))] = wire
    if payloads:
        net.exchange(payloads, phase)
    v_start, bad = set(), set()
    for v, flag in gained.items():
        if flag:
            continue
        winners = sum(1 for u in g.neighbors[v] if gained.get(int(u), False))
        if winners >= eps_hat * g.degree(v):
            v_start.add(v)
        else:
            bad.add(v)
    return v_start, bad


@dataclass(frozen=True)
class MultiTrialParams:
    """Constants of the multi-color trial and its indicator-vector length."""

    alpha: float = 1 / 12
    beta: float = 1 / 3
    c_nu: float = 4.0

    def t_of(self, palette_size: int) -> int:
        return 6 * max(1, palette_size)

    def nu_of(self, t: int, n: int) -> float:
        return max(float(max(n, 2)) ** -self.c_nu,
                   12.0 * math.exp(-self.alpha * t / 45.0))

    def samp_len(self, t: int, n: int, cap: int) -> int:
        l = math.ceil(45.0 / (self.alpha * self.beta ** 2)
                      * math.log(12.0 / self.nu_of(t, n)))
        return max(1, min(l, cap, t))


def multi_trial(net: Network, state: ColoringState, x: int,
                backend: Backend = Backend.IDEALIZED, nodes=None,
                params: MultiTrialParams | None = None,
                fixed_tries: dict | None = None,
                phase: str = "multi-trial") -> dict[int, bool]:
    """Try x pseudorandom palette colors in O(1) messages per edge.

    Announce a per-node hash onto [6|palette|], sample x colors from the
    low-hash part of the palette, exchange indicator vectors of the tried
    hash positions, and adopt the smallest tried color that no neighbor
    marked.  ``fixed_tries`` pins the tried color set of chosen nodes (they
    send vectors but never adopt), for adversarial-transcript tests.
    """
    if x < 1:
        raise ValueError("x must be at least 1")
    params = params or MultiTrialParams()
    _require_setup(state)
    g = net.graph
    cap = net.bandwidth_bits - 2
    if nodes is None:
        nodes = state.uncolored()
    fixed_tries = {v: sorted(set(c)) for v, c in (fixed_tries or {}).items()}
    participants = sorted(v for v in set(nodes)
                          if state.nodes[v].color is None
                          and v not in fixed_tries
                          and state.nodes[v].palette)

    spec_of, sampler_of, samp_of = {}, {}, {}
    payloads = {}
    for v in participants:
        t = params.t_of(len(state.nodes[v].palette))
        l = params.samp_len(t, g.n, cap)
        seed = net.rng(v).next64()
        if backend is Backend.IDEALIZED:
            spec = make_hash(Backend.IDEALIZED, state.domain_bits, t, seed)
        else:
            _, folds = state.fold_palette(v)
            spec = choose_low_collision_hash(state.domain_bits, t, folds,
                                             t // 3, seed)
        w = BitWriter().put(KIND_CONTROL, 2).put_bits(spec.to_bits())
        if backend is Backend.PAIRWISE:
            s_seed = net.rng(v).next64()
            sampler_of[v] = SamplerMultiset(t, l, s_seed)
            w.put(s_seed, 64)
        spec_of[v], samp_of[v] = spec, l
        wire = w.done()
        for u_ in g.neighbors[v]:
            payloads[(v, int(u_))] = wire
    if payloads:
        net.exchange(payloads, phase)

    tried: dict[int, list[int]] = {}
    for v in participants:
        colors, folds = state.fold_palette(v)
        hv = spec_of[v].eval_many(folds)
        if backend is Backend.IDEALIZED:
            vals, counts = np.unique(hv, return_counts=True)
            unique_vals = set(vals[counts == 1].tolist())
            pool = [c for c, h in zip(colors, hv.tolist())
                    if h <= samp_of[v] and h in unique_vals]
        else:
            s_vals = set(sampler_of[v].positions().tolist())
            pool = [c for c, h in zip(colors, hv.tolist()) if h in s_vals]
        if not pool:
            tried[v] = []
            continue
        rng = net.rng(v)
        tried[v] = sorted({pool[rng.randrange(len(pool))]
                           for _ in range(min(x, 256))})
    tried.update(fixed_tries)

    payloads = {}
    for w_node in sorted(tried):
        cols = tried[w_node]
        if not cols:
            continue
        folds_tried = np.fromiter((_fold64(c) for c in cols),
                                  dtype=np.uint64, count=len(cols))
        for u_ in g.neighbors[w_node]:
            u = int(u_)
            if u not in spec_of:
                continue
            vals = set(spec_of[u].eval_many(folds_tried).tolist())
            l = samp_of[u]
            mask = 0
            if backend is Backend.IDEALIZED:
                for h in vals:
                    if h <= l:
                        mask |= 1 << (h - 1)
            else:
                for i, s in enumerate(sampler_of[u].positions().tolist()):
                    if s in vals:
                        mask |= 1 << i
            payloads[(w_node, u)] = BitWriter().put(KIND_VECTOR, 2).put(
                mask, l).done()
    if payloads:
        net.exchange(payloads, phase)

    occupied = {v: 0 for v in participants}
    for (w_node, u) in payloads:
        occupied[u] |= payloads[(w_node, u)].value >> 2

    adopts = {}
    for v in participants:
        occ = occupied[v]
        if backend is Backend.IDEALIZED:
            for c in tried[v]:
                pos = spec_of[v].eval(_fold64(c))
                if not (occ >> (pos - 1)) & 1:
                    adopts[v] = c
                    break
        else:
            first_pos = {}
            for i, s in enumerate(sampler_of[v].positions().tolist()):
                first_pos.setdefault(s, i)
            for c in tried[v]:
                pos = first_pos.get(spec_of[v].eval(_fold64(c)))
                if pos is not None and not (occ >> pos) & 1:
                    adopts[v] = c
                    break
    _apply_adoptions(net, state, adopts, phase)
    return {v: v in adopts for v in participants}


def slack_color_schedule(s_min: int, kappa: float) -> dict:
    """The trial schedule: tower rounds then geometric rounds.

    Each entry is (x, divisor): try x colors, then drop every node whose
    uncolored degree exceeds slack/divisor.
    """
    if s_min < 2:
        raise ValueError("s_min must be at least 2")
    if not 1.0 / s_min < kappa <= 1.0:
        raise ValueError("kappa must be in (1/s_min, 1]")
    rho = s_min ** (1.0 / (1.0 + kappa))
    tower = [(_tetrate(i), min(2.0 ** min(_tetrate(i), 64), rho ** kappa))
             for i in range(log_star(rho) + 1)]
    finish = [(max(1, round(rho ** (i * kappa))),
               min(rho ** ((i + 1) * kappa), rho))
              for i in range(1, math.ceil(1.0 / kappa) + 1)]
    return {"rho": rho, "tower": tower, "finish": finish,
            "final_x": max(1, round(rho))}


def slack_color(net: Network, state: ColoringState, participants,
                s_min: int, kappa: float,
                backend: Backend = Backend.IDEALIZED,
                params: MultiTrialParams | None = None, try_rounds: int = 3,
                phase: str = "slack-color") -> set[int]:
    """Color nodes that all hold slack >= s_min; returns the dropouts.

    A few random tries, then multi-color trials with tower-growing x and a
    progress test after each batch; nodes failing the test stop
    participating and are left to the fallback.
    """
    sched = slack_color_schedule(s_min, kappa)
    parts = sorted(v for v in set(participants)
                   if state.nodes[v].color is None)
    for _ in range(try_rounds):
        live = [v for v in parts if state.nodes[v].color is None]
        if live:
            try_random_color(net, state, live, phase)
    active, dropped = [], set()
    for v in parts:
        nd = state.nodes[v]
        if nd.color is not None:
            continue
        if nd.slack() >= 2 * nd.uncolored_degree:
            active.append(v)
        else:
            dropped.add(v)

    def run_batch(x: int, reps: int, divisor: float) -> None:
        nonlocal active
        for _ in range(reps):
            live = [v for v in active if state.nodes[v].color is None]
            if live:
                multi_trial(net, state, x, backend, nodes=live,
                            params=params, phase=phase)
        kept = []
        for v in active:
            nd = state.nodes[v]
            if nd.color is not None:
                continue
            if nd.uncolored_degree > nd.slack() / divisor:
                dropped.add(v)
            else:
                kept.append(v)
        active = kept

    for x, divisor in sched["tower"]:
        run_batch(x, 2, divisor)
    for x, divisor in sched["finish"]:
        run_batch(x, 3, divisor)
    live = [v for v in active if state.nodes[v].color is None]
    if live:
        multi_trial(net, state, sched["final_x"], backend, nodes=live,
                    params=params, phase=phase)
    dropped |= {v for v in active if state.nodes[v].color is None}
    return dropped
