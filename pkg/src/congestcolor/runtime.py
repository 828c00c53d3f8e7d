"""Synchronous message-passing simulator with bandwidth accounting.

Two execution styles share one :class:`Network` and its counters:

* ``run_rounds`` drives per-node programs round by round.  Sends land in
  the recipient's inbox at the start of the next round, every payload is
  checked against the bandwidth budget B, and at most one message per
  neighbor per round may be sent (the CONGEST discipline).
* ``Network.exchange`` moves one logical payload per directed edge in a
  single superstep.  Payloads longer than B bits are accounted as
  ceil(len/B) back-to-back messages without materializing the chunks;
  the round counter advances by the worst edge's chunk count.

Both styles feed the same totals (rounds, messages, bits, per-phase
breakdown) and the same transcript hash, which is a pure function of
(graph, inputs, config, master_seed) regardless of thread count.
"""

from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bitio import Bits
from .hashing import derive, mix64

_PHI = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


class BandwidthError(RuntimeError):
    """A payload or send pattern violated the CONGEST budget."""


class NonterminationError(RuntimeError):
    """A node program failed to halt within max_rounds."""


# -- graph ---------------------------------------------------------------


@dataclass
class Graph:
    n: int
    edges: np.ndarray  # (m, 2), each row u < v
    neighbors: list[np.ndarray] = field(repr=False, default=None)
    degrees: np.ndarray = field(repr=False, default=None)
    edge_set: frozenset = field(repr=False, default=None)

    @classmethod
    def from_edge_list(cls, n: int, edges) -> "Graph":
        if n <= 0:
            raise ValueError("graph needs at least one node")
        rows = []
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) outside id range [0,{n})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            rows.append(key)
        rows.sort()
        arr = np.array(rows, dtype=np.int64).reshape(-1, 2)
        adj = [[] for _ in range(n)]
        for u, v in rows:
            adj[u].append(v)
            adj[v].append(u)
        neighbors = [np.array(sorted(a), dtype=np.int64) for a in adj]
        degrees = np.array([len(a) for a in adj], dtype=np.int64)
        return cls(n=n, edges=arr, neighbors=neighbors, degrees=degrees,
                   edge_set=frozenset(seen))

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def degree(self, v: int) -> int:
        return int(self.degrees[v])

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edge_set

    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.n} {self.m}\n")
            for u, v in self.edges.tolist():
                fh.write(f"{u} {v}\n")

    @classmethod
    def load(cls, path: str) -> "Graph":
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError("expected 'n m' header line")
            n, m = int(header[0]), int(header[1])
            edges = []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                u, v = line.split()
                edges.append((int(u), int(v)))
        if len(edges) != m:
            raise ValueError(f"header says {m} edges, file has {len(edges)}")
        return cls.from_edge_list(n, edges)


def load_palettes(path: str, n: int) -> list[list[int]]:
    """Read 'v c1 c2 ...' lines into a per-node color list table."""
    out: list[list[int] | None] = [None] * n
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            v = int(parts[0])
            if not 0 <= v < n:
                raise ValueError(f"palette line for unknown node {v}")
            if out[v] is not None:
                raise ValueError(f"duplicate palette line for node {v}")
            out[v] = [int(c) for c in parts[1:]]
    missing = [v for v, p in enumerate(out) if p is None]
    if missing:
        raise ValueError(f"missing palettes for nodes {missing[:5]}")
    return out


def save_palettes(path: str, palettes) -> None:
    with open(path, "w") as fh:
        for v, pal in enumerate(palettes):
            fh.write(" ".join(str(x) for x in [v, *pal]) + "\n")


# -- randomness ----------------------------------------------------------


class NodeRng:
    """Deterministic 64-bit stream (splitmix) private to one node.

    Advancing depends only on this node's own draw count, so transcripts
    do not depend on scheduling.  ``split`` children are keyed off the
    stream's base seed, not its position, so a phase can grab a stable
    substream regardless of how much the parent has been used.
    """

    __slots__ = ("base", "_state")

    def __init__(self, base: int):
        self.base = base & _MASK64
        self._state = self.base

    def next64(self) -> int:
        self._state = (self._state + _PHI) & _MASK64
        return mix64(self._state)

    def randbits(self, k: int) -> int:
        if not 0 < k <= 64:
            raise ValueError("k must be in [1, 64]")
        return self.next64() >> (64 - k)

    def randrange(self, bound: int) -> int:
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.next64() * bound) >> 64

    def random(self) -> float:
        return (self.next64() >> 11) * (2.0 ** -53)

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def split(self, tag: int) -> "NodeRng":
        return NodeRng(derive(self.base, tag))


# -- statistics ----------------------------------------------------------


@dataclass
class RoundStats:
    rounds_used: int = 0
    total_messages: int = 0
    total_bits: int = 0
    max_bits_per_edge_round: int = 0
    phase_rounds: dict = field(default_factory=dict)
    transcript_hash: str = ""

    def as_text(self) -> str:
        lines = [
            f"rounds_used={self.rounds_used}",
            f"total_messages={self.total_messages}",
            f"total_bits={self.total_bits}",
            f"max_bits_per_edge_round={self.max_bits_per_edge_round}",
        ]
        for name in sorted(self.phase_rounds):
            lines.append(f"phase.{name}={self.phase_rounds[name]}")
        lines.append(f"transcript_hash={self.transcript_hash}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    payload: Bits
    round: int


# -- network -------------------------------------------------------------


class Network:
    """Holds the graph, the budget B, per-node rng streams, and counters."""

    def __init__(self, graph: Graph, master_seed: int, bandwidth_mult: int = 1,
                 msgs_per_round_cap: int = 1, bandwidth_bits: int | None = None):
        if bandwidth_mult < 1:
            raise ValueError("bandwidth_mult must be >= 1")
        self.graph = graph
        self.master_seed = master_seed & _MASK64
        self.id_bits = max(1, (graph.n - 1).bit_length())
        if bandwidth_bits is not None:
            self.bandwidth_bits = int(bandwidth_bits)
        else:
            self.bandwidth_bits = 32 * self.id_bits * bandwidth_mult
        if self.bandwidth_bits < 1:
            raise ValueError("bandwidth budget must be positive")
        self.msgs_per_round_cap = msgs_per_round_cap
        self.round_counter = 0
        self._rngs = [NodeRng(mix64(self.master_seed ^ (v * 0xC2B2AE3D27D4EB4F)))
                      for v in range(graph.n)]
        self._edge_seed_count: dict[tuple[int, int], int] = {}
        self._stats = RoundStats()
        self._hash = hashlib.sha256()
        self._last_event_was_seed_phase: str | None = None

    # randomness

    def rng(self, v: int) -> NodeRng:
        return self._rngs[v]

    def _edge_seed_value(self, lo: int, hi: int, epoch: int) -> int:
        # keyed off the lower endpoint's stream base: pure in (master, edge,
        # epoch), so both endpoints agree without coordination
        base = self._rngs[lo].split(0xED6E5EED ^ hi).base
        return derive(base, epoch)

    def _account_edge_seed(self, lo: int, hi: int) -> None:
        chunks = -(-64 // self.bandwidth_bits)
        self._stats.total_messages += chunks
        self._stats.total_bits += 64
        self._note_bits(min(64, self.bandwidth_bits))
        self._hash.update(struct.pack("<4sqqq", b"seed", self.round_counter,
                                      lo, hi))

    def edge_shared_seed(self, u: int, v: int, phase: str = "seed") -> int:
        """Joint 64-bit seed for edge (u, v); costs one 64-bit message.

        The value depends on the lower-id endpoint's stream and on how
        often this edge has drawn before, so repeated calls give fresh
        seeds and both endpoints agree by construction.  Back-to-back
        draws in the same phase share one round block (all edges draw
        their seeds simultaneously).
        """
        lo, hi = (u, v) if u < v else (v, u)
        if not self.graph.has_edge(lo, hi):
            raise ValueError(f"edge_shared_seed on non-edge ({u},{v})")
        count = self._edge_seed_count.get((lo, hi), 0)
        self._edge_seed_count[(lo, hi)] = count + 1
        if self._last_event_was_seed_phase != phase:
            self._advance_rounds(-(-64 // self.bandwidth_bits), phase)
            self._last_event_was_seed_phase = phase
        self._account_edge_seed(lo, hi)
        return self._edge_seed_value(lo, hi, count)

    # accounting plumbing

    def _advance_rounds(self, k: int, phase: str) -> None:
        self.round_counter += k
        self._stats.rounds_used += k
        self._stats.phase_rounds[phase] = self._stats.phase_rounds.get(phase, 0) + k

    def _note_bits(self, bits_in_round: int) -> None:
        if bits_in_round > self._stats.max_bits_per_edge_round:
            self._stats.max_bits_per_edge_round = bits_in_round

    def stats(self) -> RoundStats:
        return RoundStats(
            rounds_used=self._stats.rounds_used,
            total_messages=self._stats.total_messages,
            total_bits=self._stats.total_bits,
            max_bits_per_edge_round=self._stats.max_bits_per_edge_round,
            phase_rounds=dict(self._stats.phase_rounds),
            transcript_hash=self._hash.hexdigest(),
        )

    # superstep exchange

    def exchange(self, payload_map: dict, phase: str) -> dict:
        """Deliver one logical payload per directed edge in lockstep.

        Every (src, dst) key must be an edge; each payload is accounted
        as ceil(nbits/B) consecutive messages.  The superstep costs the
        worst edge's chunk count in rounds.  Returns the map unchanged
        (receivers read their entries from it).
        """
        self._last_event_was_seed_phase = None
        if not payload_map:
            return payload_map
        B = self.bandwidth_bits
        worst = 0
        start = self.round_counter
        for (src, dst) in sorted(payload_map):
            payload = payload_map[(src, dst)]
            if not isinstance(payload, Bits):
                raise TypeError(f"payload on ({src},{dst}) is not Bits")
            if payload.nbits <= 0:
                raise BandwidthError(
                    f"[{phase}] empty payload on edge ({src},{dst})")
            if not self.graph.has_edge(src, dst):
                raise BandwidthError(
                    f"[{phase}] send on non-edge ({src},{dst})")
            chunks = -(-payload.nbits // B)
            worst = max(worst, chunks)
            self._stats.total_messages += chunks
            self._stats.total_bits += payload.nbits
            self._note_bits(min(payload.nbits, B))
            self._hash.update(struct.pack("<4sqqqq", b"xchg", start, src, dst,
                                          chunks))
            self._hash.update(payload.to_bytes())
        self._advance_rounds(worst, phase)
        return payload_map


# -- per-round execution ---------------------------------------------------


class NodeCtx:
    """What one node sees during one round."""

    __slots__ = ("node", "round", "inbox", "rng", "state", "_net", "_sends",
                 "_sent_to", "_halted", "_phase", "_seed_edges")

    def __init__(self, node: int, rnd: int, inbox: tuple, rng: NodeRng,
                 state: dict, net: Network, phase: str):
        self.node = node
        self.round = rnd
        self.inbox = inbox
        self.rng = rng
        self.state = state
        self._net = net
        self._sends: list[tuple[int, Bits]] = []
        self._sent_to: dict[int, int] = {}
        self._halted = False
        self._phase = phase
        self._seed_edges: set[tuple[int, int]] = set()

    @property
    def degree(self) -> int:
        return self._net.graph.degree(self.node)

    @property
    def neighbors(self) -> np.ndarray:
        return self._net.graph.neighbors[self.node]

    def send(self, neighbor: int, payload: Bits) -> None:
        net = self._net
        if not net.graph.has_edge(self.node, neighbor):
            raise BandwidthError(
                f"[{self._phase}] node {self.node} sent to non-neighbor "
                f"{neighbor} in round {self.round}")
        if payload.nbits > net.bandwidth_bits:
            raise BandwidthError(
                f"[{self._phase}] node {self.node} payload of {payload.nbits} "
                f"bits exceeds B={net.bandwidth_bits} in round {self.round}")
        used = self._sent_to.get(neighbor, 0)
        if used >= net.msgs_per_round_cap:
            raise BandwidthError(
                f"[{self._phase}] node {self.node} exceeded the per-neighbor "
                f"message cap to {neighbor} in round {self.round}")
        self._sent_to[neighbor] = used + 1
        self._sends.append((neighbor, payload))

    def broadcast(self, payload: Bits) -> None:
        for u in self.neighbors.tolist():
            self.send(u, payload)

    def edge_shared_seed(self, neighbor: int) -> int:
        """Same-round joint seed; accounted during the delivery barrier.

        Reads shared state but never writes it, so threaded activations
        stay race-free; both endpoints see the same epoch within a round.
        """
        net = self._net
        if not net.graph.has_edge(self.node, neighbor):
            raise BandwidthError(
                f"[{self._phase}] node {self.node} drew an edge seed with "
                f"non-neighbor {neighbor}")
        lo, hi = min(self.node, neighbor), max(self.node, neighbor)
        self._seed_edges.add((lo, hi))
        epoch = net._edge_seed_count.get((lo, hi), 0)
        return net._edge_seed_value(lo, hi, epoch)

    def halt(self) -> None:
        self._halted = True


def run_rounds(network: Network, node_program, max_rounds: int,
               threads: int = 1, phase: str = "rounds",
               states: list[dict] | None = None) -> RoundStats:
    """Run ``node_program(ctx)`` on every live node per round until all halt.

    Sends from round r are delivered (sorted by sender) at the start of
    round r+1.  Results are independent of ``threads``: per-node effects
    are collected locally and merged in node order.  Per-node outcomes
    persist in ``states`` (pass a list of dicts to read them back).
    Raises :class:`NonterminationError` if any node is still live after
    ``max_rounds`` rounds.
    """
    g = network.graph
    before = network._stats.rounds_used
    if states is None:
        states = [dict() for _ in range(g.n)]
    elif len(states) != g.n:
        raise ValueError("states must hold one dict per node")
    live = list(range(g.n))
    inboxes: list[list[Message]] = [[] for _ in range(g.n)]
    rnd = 0
    while live:
        if rnd >= max_rounds:
            raise NonterminationError(
                f"[{phase}] {len(live)} node(s) still running after "
                f"{max_rounds} rounds")
        rnd += 1
        network._last_event_was_seed_phase = None

        def activate(v: int) -> NodeCtx:
            ctx = NodeCtx(v, rnd, tuple(inboxes[v]), network._rngs[v],
                          states[v], network, phase)
            node_program(ctx)
            return ctx

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                ctxs = list(pool.map(activate, live))
        else:
            ctxs = [activate(v) for v in live]

        inboxes = [[] for _ in range(g.n)]
        any_sent = False
        for ctx in ctxs:  # live is sorted, so merge order is by node id
            for neighbor, payload in ctx._sends:
                any_sent = True
                inboxes[neighbor].append(Message(ctx.node, neighbor, payload,
                                                 rnd))
                network._stats.total_messages += 1
                network._stats.total_bits += payload.nbits
                network._note_bits(payload.nbits)
                network._hash.update(struct.pack(
                    "<4sqqq", b"send", network.round_counter + 1, ctx.node,
                    neighbor))
                network._hash.update(payload.to_bytes())
        if any_sent:
            network._advance_rounds(1, phase)
        seed_edges = sorted({e for ctx in ctxs for e in ctx._seed_edges})
        if seed_edges:
            # seed traffic gets its own round block so the per-edge-round
            # bit ceiling stays honest alongside regular sends
            network._advance_rounds(-(-64 // network.bandwidth_bits), phase)
            for lo, hi in seed_edges:
                network._edge_seed_count[(lo, hi)] = \
                    network._edge_seed_count.get((lo, hi), 0) + 1
                network._account_edge_seed(lo, hi)
        live = [ctx.node for ctx in ctxs if not ctx._halted]
    delta = network._stats.rounds_used - before
    snap = network.stats()
    snap.rounds_used = delta
    return snap
