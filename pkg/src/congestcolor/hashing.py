"""Hash families, samplers and the error-correcting code.

Two hash backends share one interface:

* ``IDEALIZED`` -- a keyed 64-bit mixing function treated as a random
  function.  The key is the only state, so an edge that agrees on a seed
  agrees on the whole function.
* ``PAIRWISE`` -- h(x) = ((a*x + b) mod p) mod T with a public prime
  p = nextprime(max(2^universe_bits, T*2^10)), so the mod-T folding skews
  any output probability by at most 2^-10.  (a, b) are derived from the
  64-bit seed, which is all that needs to be transmitted besides the
  (universe_bits, T) header.

Outputs are in [1, T] throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np
import sympy

from .bitio import Bits, BitReader, BitWriter

_MASK64 = (1 << 64) - 1
_PHI = 0x9E3779B97F4A7C15
_PHI2 = 0xC2B2AE3D27D4EB4F


def mix64(z: int) -> int:
    """splitmix64 finalizer; bijective on 64-bit words."""
    z = (z + _PHI) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(_PHI)).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def derive(seed: int, tag: int) -> int:
    """Independent-looking 64-bit substream from (seed, tag)."""
    return mix64((seed ^ ((tag * _PHI2) & _MASK64)) & _MASK64)


def derive_uniform(seed: int, tag: int, bound: int) -> int:
    """Uniform value in [0, bound) with enough entropy for large bounds."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    words = (bound.bit_length() + 128) // 64 + 1
    acc = 0
    for i in range(words):
        acc = (acc << 64) | derive(seed, tag * 1031 + i)
    return acc % bound


class Backend(IntEnum):
    IDEALIZED = 0
    PAIRWISE = 1


@lru_cache(maxsize=512)
def _public_prime(universe_bits: int, out_size: int) -> int:
    return int(sympy.nextprime(max(1 << universe_bits, out_size << 10)))


@dataclass(frozen=True)
class HashSpec:
    """A concrete hash function [0, 2^domain_bits) -> [1, out_size]."""

    backend: Backend
    domain_bits: int
    out_size: int
    seed: int
    explicit_coeffs: tuple[int, int] | None = None  # set when decoded off the wire

    @property
    def prime(self) -> int:
        if self.backend is not Backend.PAIRWISE:
            raise ValueError("prime is defined for the pairwise backend only")
        return _public_prime(self.domain_bits, self.out_size)

    @property
    def coeffs(self) -> tuple[int, int]:
        if self.explicit_coeffs is not None:
            return self.explicit_coeffs
        p = self.prime
        a = 1 + derive_uniform(self.seed, 1, p - 1)
        b = derive_uniform(self.seed, 2, p)
        return a, b

    def eval(self, x: int) -> int:
        if x < 0 or x >> self.domain_bits:
            raise ValueError("input outside hash domain")
        if self.backend is Backend.IDEALIZED:
            acc = mix64(self.seed)
            while True:
                acc = mix64(acc ^ (x & _MASK64))
                x >>= 64
                if not x:
                    break
            return acc % self.out_size + 1
        a, b = self.coeffs
        return ((a * x + b) % self.prime) % self.out_size + 1

    def eval_many(self, xs) -> np.ndarray:
        """Vectorised eval; inputs must fit in uint64 for the fast paths."""
        xs = np.asarray(xs, dtype=np.uint64)
        if xs.size == 0:
            return np.empty(0, dtype=np.int64)
        if self.backend is Backend.IDEALIZED:
            acc = np.uint64(mix64(self.seed))
            z = _mix64_np(xs ^ acc)
            return (z % np.uint64(self.out_size)).astype(np.int64) + 1
        p = self.prime
        a, b = self.coeffs
        if (p - 1) * ((1 << min(self.domain_bits, 64)) - 1) + b < (1 << 62):
            v = (xs.astype(np.int64) * np.int64(a) + np.int64(b)) % np.int64(p)
            return (v % np.int64(self.out_size)) + 1
        return np.array([((a * int(x) + b) % p) % self.out_size + 1 for x in xs],
                        dtype=np.int64)

    # -- wire format -------------------------------------------------------
    # 2-bit backend tag, 8-bit domain_bits, 32-bit out_size, then either a
    # 64-bit seed (idealized) or the two field elements a, b of
    # ceil(log2 p) bits each (pairwise).  Specs whose out_size does not fit
    # 32 bits (the per-node color hashes, out_size = n^d) use the wide
    # layout: tag 2, an 8-bit d and 32-bit n replace the out_size field.

    def to_bits(self) -> Bits:
        w = BitWriter()
        if self.out_size >= (1 << 32):
            raise ValueError("out_size exceeds the 32-bit wire field")
        w.put(int(self.backend), 2)
        w.put(self.domain_bits, 8)
        w.put(self.out_size, 32)
        if self.backend is Backend.IDEALIZED:
            w.put(self.seed & _MASK64, 64)
        else:
            p = self.prime
            width = p.bit_length()
            a, b = self.coeffs
            w.put(a, width)
            w.put(b, width)
        return w.done()

    @property
    def wire_bits(self) -> int:
        if self.backend is Backend.IDEALIZED:
            return 2 + 8 + 32 + 64
        return 2 + 8 + 32 + 2 * self.prime.bit_length()


def hash_spec_from_bits(bits: Bits) -> HashSpec:
    """Decode the standard wire layout.

    The pairwise layout transmits the field elements (a, b) rather than the
    seed, so the decoded spec carries them explicitly; it evaluates
    identically to the sender's seed-derived spec.
    """
    r = BitReader(bits)
    backend = Backend(r.take(2))
    domain_bits = r.take(8)
    out_size = r.take(32)
    if backend is Backend.IDEALIZED:
        seed = r.take(64)
        return HashSpec(backend, domain_bits, out_size, seed)
    width = _public_prime(domain_bits, out_size).bit_length()
    a, b = r.take(width), r.take(width)
    return HashSpec(backend, domain_bits, out_size, 0, explicit_coeffs=(a, b))


def make_hash(backend: Backend, universe_bits: int, out_size: int, seed: int) -> HashSpec:
    if universe_bits < 1 or universe_bits > 255:
        raise ValueError("universe_bits must be in [1, 255]")
    if out_size < 1:
        raise ValueError("out_size must be positive")
    return HashSpec(Backend(backend), universe_bits, out_size, seed & _MASK64)


@lru_cache(maxsize=128)
def _color_prime(out_bits: int, chunks: int) -> int:
    return int(sympy.nextprime((4 * chunks) << out_bits))


@dataclass(frozen=True)
class ColorHash:
    """Color-announcement hash [0, 2^domain_bits) -> [0, 2^out_bits).

    A polynomial fingerprint over out_bits-wide chunks of the color,
    composed with a pairwise map.  Two distinct colors collide with
    probability at most 3/2^out_bits over the seed, while the description
    stays O(out_bits + log domain_bits) bits, exponentially smaller than
    the color space it hashes.
    """

    domain_bits: int
    out_bits: int
    seed: int
    explicit_keys: tuple[int, int, int] | None = None  # set when decoded

    @property
    def chunks(self) -> int:
        return -(-self.domain_bits // self.out_bits) or 1

    @property
    def prime(self) -> int:
        return _color_prime(self.out_bits, self.chunks)

    @property
    def keys(self) -> tuple[int, int, int]:
        if self.explicit_keys is not None:
            return self.explicit_keys
        p = self.prime
        key = 1 + derive_uniform(self.seed, 1, p - 1)
        a = 1 + derive_uniform(self.seed, 2, p - 1)
        b = derive_uniform(self.seed, 3, p)
        return key, a, b

    def eval(self, color: int) -> int:
        if color < 0 or color >> self.domain_bits:
            raise ValueError("color outside hash domain")
        p = self.prime
        key, a, b = self.keys
        mask = (1 << self.out_bits) - 1
        acc = 0
        power = key
        while True:
            acc = (acc + (color & mask) * power) % p
            color >>= self.out_bits
            if not color:
                break
            power = power * key % p
        return (a * acc + b) % p & mask

    def to_bits(self) -> Bits:
        w = BitWriter()
        w.put(self.domain_bits, 16)
        w.put(self.out_bits, 8)
        width = self.prime.bit_length()
        for value in self.keys:
            w.put(value, width)
        return w.done()

    @property
    def wire_bits(self) -> int:
        return 16 + 8 + 3 * self.prime.bit_length()


def color_hash_from_bits(bits: Bits) -> ColorHash:
    r = BitReader(bits)
    domain_bits = r.take(16)
    out_bits = r.take(8)
    width = ColorHash(domain_bits, out_bits, 0).prime.bit_length()
    keys = tuple(r.take(width) for _ in range(3))
    return ColorHash(domain_bits, out_bits, 0, explicit_keys=keys)


def make_color_hash(colorspace_bits: int, n: int, d: int, seed: int) -> ColorHash:
    """Per-node color hash onto 2^ceil(d log2 n) values, d >= 6.

    At that output size the probability that any two of the O(Delta^2)
    colors seen in a neighborhood collide is below n^{-d+5}, so hash-level
    color exchange is safe for every protocol in this package.
    """
    if d < 6:
        raise ValueError("d must be at least 6")
    if not 1 <= colorspace_bits <= 0xFFFF:
        raise ValueError("colorspace_bits must be in [1, 65535]")
    out_bits = max(8, (max(n, 2) ** d - 1).bit_length())
    return ColorHash(colorspace_bits, out_bits, seed & _MASK64)


class LowCollisionRetryError(RuntimeError):
    """choose_low_collision_hash ran out of attempts (needs |S| <= T/2)."""


def collision_involved_count(spec: HashSpec, elements) -> int:
    """Number of elements of S mapped to a hash cell that S hits twice+."""
    arr = np.asarray(list(elements), dtype=np.uint64)
    if arr.size == 0:
        return 0
    hs = spec.eval_many(arr)
    _, counts = np.unique(hs, return_counts=True)
    return int(counts[counts > 1].sum())


def choose_low_collision_hash(universe_bits: int, out_size: int, elements,
                              budget: int, seed: int, attempts: int = 64) -> HashSpec:
    """Pick a pairwise hash with at most ``budget`` collision-involved
    elements of S, by rejection sampling over derived seeds."""
    elems = list(elements)
    for i in range(attempts):
        spec = make_hash(Backend.PAIRWISE, universe_bits, out_size, derive(seed, i + 1))
        if collision_involved_count(spec, elems) <= budget:
            return spec
    raise LowCollisionRetryError(
        f"no hash with <= {budget} collision-involved elements in {attempts} "
        f"attempts (|S|={len(elems)}, T={out_size}; requires |S| <= T/2)")


@dataclass(frozen=True)
class SamplerMultiset:
    """Seed-reproducible multiset of t stratified positions in [1, T].

    Position i is drawn from stratum [i*T/t, (i+1)*T/t), one draw per
    stratum, so coverage noise vanishes as t approaches T (at t = T the
    multiset is exactly [1, T]); this stands in for the representative
    multisets that an averaging sampler would provide."""

    out_size: int
    size: int
    seed: int

    def positions(self) -> np.ndarray:
        if self.size == 0:
            return np.empty(0, dtype=np.int64)
        idx = np.arange(self.size, dtype=np.int64)
        start = idx * self.out_size // self.size
        width = np.maximum(1, (idx + 1) * self.out_size // self.size - start)
        base = np.uint64(mix64(self.seed ^ _PHI2))
        z = _mix64_np((idx + 1).astype(np.uint64) * np.uint64(_PHI) ^ base)
        return start + (z % width.astype(np.uint64)).astype(np.int64) + 1


def sample_multiset(out_size: int, size: int, seed: int) -> SamplerMultiset:
    if out_size < 1:
        raise ValueError("out_size must be positive")
    if size < 0:
        raise ValueError("size must be nonnegative")
    return SamplerMultiset(out_size, size, seed & _MASK64)


# -- error-correcting code --------------------------------------------------

ECC_PUBLIC_SEED = 0x5D1C0DE5EEDF00D


@dataclass(frozen=True)
class EccCode:
    """Random linear [3b, b] binary code with measured distance >= b/2."""

    msg_bits: int
    generator: np.ndarray  # (b, 3b) uint8, read-only
    min_distance: int

    @property
    def code_bits(self) -> int:
        return 3 * self.msg_bits

    def encode(self, value: int) -> int:
        if value < 0 or value >> self.msg_bits:
            raise ValueError(f"message does not fit in {self.msg_bits} bits")
        bits = _int_to_bitvec(value, self.msg_bits)
        code = bits @ self.generator % 2
        return _bitvec_to_int(code)

    def encode_many(self, values) -> np.ndarray:
        vals = np.asarray(values, dtype=np.uint64)
        rows = ((vals[:, None] >> np.arange(self.msg_bits, dtype=np.uint64)) &
                np.uint64(1)).astype(np.uint8)
        codes = rows @ self.generator % 2
        weights = np.uint64(1) << np.arange(self.code_bits, dtype=np.uint64)
        return (codes.astype(np.uint64) * weights).sum(axis=1)


def _int_to_bitvec(value: int, nbits: int) -> np.ndarray:
    return ((value >> np.arange(nbits)) & 1).astype(np.uint8)


def _bitvec_to_int(bits: np.ndarray) -> int:
    out = 0
    for i, b in enumerate(bits):
        out |= int(b) << i
    return out


def _code_min_distance(generator: np.ndarray, msg_bits: int) -> int:
    msgs = np.arange(1, 1 << msg_bits, dtype=np.uint64)
    rows = ((msgs[:, None] >> np.arange(msg_bits, dtype=np.uint64)) &
            np.uint64(1)).astype(np.uint8)
    codes = rows @ generator % 2
    return int(codes.sum(axis=1).min())


@lru_cache(maxsize=64)
def make_ecc(msg_bits: int, seed: int = ECC_PUBLIC_SEED) -> EccCode:
    """Construct the code, resampling the public generator until the
    exhaustively measured minimum distance reaches msg_bits/2."""
    if msg_bits < 2 or msg_bits > 16:
        raise ValueError("msg_bits must be in [2, 16] (distance is verified "
                         "exhaustively)")
    need = (msg_bits + 1) // 2
    for attempt in range(256):
        rows = []
        for r in range(msg_bits):
            acc = 0
            for w in range(3 * msg_bits):
                acc |= (derive(seed, attempt * 65536 + r * 256 + w) & 1) << w
            rows.append(_int_to_bitvec(acc, 3 * msg_bits))
        gen = np.array(rows, dtype=np.uint8)
        dist = _code_min_distance(gen, msg_bits)
        if dist >= need:
            gen.setflags(write=False)
            return EccCode(msg_bits, gen, dist)
    raise RuntimeError("could not find a generator with the target distance")


def ecc_encode(code: EccCode, value: int) -> int:
    return code.encode(value)
