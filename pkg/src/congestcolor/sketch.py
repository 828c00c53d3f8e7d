"""Set operators and bandwidth-light intersection estimation.

For a hash h and threshold l, the three operators on a set A (with respect
to a set B containing it or overlapping it) are

* restrict(A, h, l)   -- elements of A hashing into [1, l];
* collide(A, h, B, l) -- elements of A hashing into [1, l] whose hash is
  shared with some other element of B;
* hit(A, h, B, l)     -- restrict minus collide: elements with a private
  hash cell below the threshold.

``estimate_similarity`` and ``joint_sample`` exchange l-bit masks of
hit-set images over one edge and read off intersection information.  Both
endpoints compute the same numbers, so the math lives in pure cores that
the statistical test-benches call directly; the network wrappers add the
message traffic and bandwidth accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitio import Bits, bitmask_of
from .hashing import Backend, HashSpec, derive, make_hash


def _as_array(A) -> np.ndarray:
    if isinstance(A, np.ndarray):
        return A.astype(np.uint64, copy=False)
    return np.fromiter((int(x) for x in A), dtype=np.uint64)


def restrict(A, h: HashSpec, l: int) -> set[int]:
    arr = _as_array(A)
    if arr.size == 0:
        return set()
    hs = h.eval_many(arr)
    return set(arr[hs <= l].tolist())


def collide(A, h: HashSpec, B, l: int) -> set[int]:
    arr_a = _as_array(A)
    if arr_a.size == 0:
        return set()
    arr_b = _as_array(B)
    hs_a = h.eval_many(arr_a)
    if arr_b.size:
        hs_b = h.eval_many(arr_b)
    else:
        hs_b = np.empty(0, dtype=np.int64)
    out = set()
    for x, hx in zip(arr_a.tolist(), hs_a.tolist()):
        if hx > l:
            continue
        mates = arr_b[hs_b == hx]
        if any(int(y) != x for y in mates.tolist()):
            out.add(x)
    return out


def hit(A, h: HashSpec, B, l: int) -> set[int]:
    return restrict(A, h, l) - collide(A, h, B, l)


@dataclass(frozen=True)
class SketchParams:
    """Estimator sizing.

    ``k_const`` and ``samp_const`` keep the shape of the analysis
    (k ~ eps^-3 log(1/nu) / max, l ~ alpha^-1 beta^-2 log(1/nu)); the
    full-strength constants (96 and 45) are far larger than a simulation
    needs and would blow up replication factors and message sizes.  The
    defaults are tuned so that either the cap l = T binds (the estimator
    then counts every hit cell and is near-exact) or l stays large enough
    that the sampling error sits well inside eps * max(|S_u|, |S_v|).
    """

    k_const: float = 96 / 8192
    samp_const: float = 45 / 1024

    @classmethod
    def full_strength(cls) -> "SketchParams":
        return cls(k_const=96.0, samp_const=45.0)

    def derive_sizes(self, size_u: int, size_v: int, eps: float, nu: float,
                     k_override: int | None = None) -> tuple[int, int, int]:
        """Return (k, T, l) for the given set sizes and target accuracy."""
        if not 0 < eps < 1:
            raise ValueError("eps must be in (0, 1)")
        if not 0 < nu < 1:
            raise ValueError("nu must be in (0, 1)")
        mx = max(size_u, size_v)
        if mx == 0:
            return 1, 1, 1
        log_term = math.log(12.0 / nu)
        if k_override is not None:
            k = max(1, int(k_override))
        else:
            k = max(1, math.ceil(self.k_const * log_term / (eps ** 3 * mx)))
        T = math.ceil(8.0 * mx * k / eps)
        alpha = eps * eps / 8.0
        beta = eps / 4.0
        l = math.ceil(self.samp_const * log_term / (alpha * beta * beta))
        return k, T, min(max(l, 1), T)


def _scaled(arr: np.ndarray, k: int, universe_bits: int) -> tuple[np.ndarray, int]:
    """Replace A by A x [k]: element (x, j) encoded as (j << ub) | x."""
    if k == 1:
        return arr, universe_bits
    jbits = max(1, (k - 1).bit_length())
    if universe_bits + jbits > 63:
        raise ValueError("scaled universe exceeds the 63-bit vector domain")
    js = np.arange(k, dtype=np.uint64) << np.uint64(universe_bits)
    return np.add.outer(js, arr).ravel(), universe_bits + jbits


def _hit_image(arr: np.ndarray, h: HashSpec, l: int) -> np.ndarray:
    """Sorted h(hit(A, h, A, l)): hash values below l owned by exactly one
    element of A."""
    if arr.size == 0:
        return np.empty(0, dtype=np.int64)
    hs = h.eval_many(arr)
    vals, counts = np.unique(hs, return_counts=True)
    vals = vals[counts == 1]
    return vals[vals <= l]


@dataclass(frozen=True)
class SimilarityResult:
    estimate: float
    bits_sent: int
    scale_factor: int
    out_size: int = 0
    mask_bits: int = 0
    shared_count: int = 0


def estimate_similarity_core(S_u, S_v, eps: float, nu: float, seed: int,
                             universe_bits: int,
                             params: SketchParams = SketchParams(),
                             k_override: int | None = None) -> SimilarityResult:
    """Both-endpoint view of the similarity estimator.

    Returns the common estimate of |S_u <intersect> S_v| with additive error
    eps * max(|S_u|, |S_v|) (with probability 1 - nu at full-strength
    parameters).  Empty input on either side short-circuits to 0.
    """
    arr_u = _as_array(S_u)
    arr_v = _as_array(S_v)
    if arr_u.size == 0 or arr_v.size == 0:
        return SimilarityResult(0.0, 0, 1)
    k, T, l = params.derive_sizes(arr_u.size, arr_v.size, eps, nu, k_override)
    su, ub = _scaled(arr_u, k, universe_bits)
    sv, _ = _scaled(arr_v, k, universe_bits)
    h = make_hash(Backend.IDEALIZED, ub, T, seed)
    img_u = _hit_image(su, h, l)
    img_v = _hit_image(sv, h, l)
    count = int(np.intersect1d(img_u, img_v, assume_unique=True).size)
    estimate = count * T / (l * k)
    return SimilarityResult(estimate, 2 * l, k, out_size=T, mask_bits=l,
                            shared_count=count)


@dataclass(frozen=True)
class JointSampleResult:
    side_u: tuple
    side_v: tuple
    shared_count: int
    bits_sent: int


def joint_sample_core(S_u, S_v, eps: float, nu: float, seed: int,
                      universe_bits: int, count: int,
                      params: SketchParams = SketchParams()) -> JointSampleResult:
    """Draw ``count`` joint samples from the hit-image intersection.

    Position i on each side holds the (projected) unique preimage of the
    i-th jointly drawn shared hash value, or None for every position when
    the images do not intersect.  When the overlap is at least
    eps * max(|S_u|, |S_v|), the two sides name the same element of the
    intersection with probability 1 - 5 eps/4 - nu (full-strength).
    """
    arr_u = _as_array(S_u)
    arr_v = _as_array(S_v)
    if arr_u.size == 0 or arr_v.size == 0:
        return JointSampleResult((None,) * count, (None,) * count, 0, 0)
    k, T, l = params.derive_sizes(arr_u.size, arr_v.size, eps, nu)
    su, ub = _scaled(arr_u, k, universe_bits)
    sv, _ = _scaled(arr_v, k, universe_bits)
    h = make_hash(Backend.IDEALIZED, ub, T, seed)

    def owners(arr):
        hs = h.eval_many(arr)
        vals, first, counts = np.unique(hs, return_index=True, return_counts=True)
        keep = (counts == 1) & (vals <= l)
        return vals[keep], arr[first[keep]]

    vals_u, elems_u = owners(su)
    vals_v, elems_v = owners(sv)
    common = np.intersect1d(vals_u, vals_v, assume_unique=True)
    J = int(common.size)
    if J == 0:
        return JointSampleResult((None,) * count, (None,) * count, 0, 2 * l)
    mask = (1 << universe_bits) - 1
    pick_u = dict(zip(vals_u.tolist(), elems_u.tolist()))
    pick_v = dict(zip(vals_v.tolist(), elems_v.tolist()))
    out_u, out_v = [], []
    for i in range(count):
        j = derive(seed, 0x4A53 + i) % J
        val = int(common[j])
        out_u.append(int(pick_u[val]) & mask)
        out_v.append(int(pick_v[val]) & mask)
    return JointSampleResult(tuple(out_u), tuple(out_v), J, 2 * l)


# -- network wrappers --------------------------------------------------------

SIZE_FIELD_BITS = 32


def run_edge_similarity(net, u: int, v: int, S_u, S_v, eps: float, nu: float,
                        params: SketchParams, phase: str) -> SimilarityResult:
    """Run the estimator over edge (u, v) with real messages.

    Exchanges set sizes, draws the shared hash seed, and ships the two
    hit-image masks; both endpoints end up with the same estimate.
    """
    arr_u = _as_array(S_u)
    arr_v = _as_array(S_v)
    net.exchange({(u, v): Bits(arr_u.size, SIZE_FIELD_BITS),
                  (v, u): Bits(arr_v.size, SIZE_FIELD_BITS)}, phase)
    if arr_u.size == 0 or arr_v.size == 0:
        return SimilarityResult(0.0, 2 * SIZE_FIELD_BITS, 1)
    seed = net.edge_shared_seed(u, v, phase)
    ub = net.id_bits
    k, T, l = params.derive_sizes(arr_u.size, arr_v.size, eps, nu)
    su, ubs = _scaled(arr_u, k, ub)
    sv, _ = _scaled(arr_v, k, ub)
    h = make_hash(Backend.IDEALIZED, ubs, T, seed)
    img_u = _hit_image(su, h, l)
    img_v = _hit_image(sv, h, l)
    mask_u = bitmask_of(img_u.tolist(), l)
    mask_v = bitmask_of(img_v.tolist(), l)
    net.exchange({(u, v): mask_u, (v, u): mask_v}, phase)
    count = (mask_u.value & mask_v.value).bit_count()
    estimate = count * T / (l * k)
    return SimilarityResult(estimate, 2 * SIZE_FIELD_BITS + 64 + 2 * l, k,
                            out_size=T, mask_bits=l, shared_count=count)


def run_edge_joint_sample(net, u: int, v: int, S_u, S_v, eps: float, nu: float,
                          count: int, params: SketchParams,
                          phase: str) -> JointSampleResult:
    arr_u = _as_array(S_u)
    arr_v = _as_array(S_v)
    net.exchange({(u, v): Bits(arr_u.size, SIZE_FIELD_BITS),
                  (v, u): Bits(arr_v.size, SIZE_FIELD_BITS)}, phase)
    if arr_u.size == 0 or arr_v.size == 0:
        return JointSampleResult((None,) * count, (None,) * count, 0,
                                 2 * SIZE_FIELD_BITS)
    seed = net.edge_shared_seed(u, v, phase)
    res = joint_sample_core(arr_u, arr_v, eps, nu, seed, net.id_bits, count,
                            params)
    k, T, l = params.derive_sizes(arr_u.size, arr_v.size, eps, nu)
    su, ubs = _scaled(arr_u, k, net.id_bits)
    sv, _ = _scaled(arr_v, k, net.id_bits)
    h = make_hash(Backend.IDEALIZED, ubs, T, seed)
    mask_u = bitmask_of(_hit_image(su, h, l).tolist(), l)
    mask_v = bitmask_of(_hit_image(sv, h, l).tolist(), l)
    net.exchange({(u, v): mask_u, (v, u): mask_v}, phase)
    return res
