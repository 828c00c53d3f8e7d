"""Acceptance gate: eleven headline guarantees, one PASS/FAIL line each.

Each criterion is driven by the seeded trial registry; verdicts are cached
so shared campaigns (the totality corpus feeds both the correctness and the
bandwidth criteria) run once.  Run with ``-s`` to see the lines as they
print; on failure the line is also the assertion message.
"""

from __future__ import annotations

import time

from congestcolor import trials
from congestcolor.generators import cycle
from congestcolor.runtime import Bits, Network, run_rounds

_VERDICTS: dict = {}
_ELAPSED: dict = {}


def verdict(name: str):
    if name not in _VERDICTS:
        start = time.perf_counter()
        _VERDICTS[name] = trials.run_trials(trials.get_trial(name))
        _ELAPSED[name] = time.perf_counter() - start
    return _VERDICTS[name]


def by_prefix(prefix: str):
    names = [s.name for s in trials.registry() if s.name.startswith(prefix)]
    return [verdict(name) for name in names]


def report(tag: str, ok: bool, detail: str) -> None:
    line = f"[{tag}] {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    assert ok, line


def test_c01_correctness_totality():
    v = verdict("pipeline-totality")
    took = _ELAPSED["pipeline-totality"]
    ok = v.passed and took <= 600.0
    good = v.seeds - v.failures
    report("C1", ok, f"complete+proper+list-valid colorings on "
                     f"{good}/{v.seeds} corpus instances in {took:.0f}s "
                     f"(cap 600s)")


def test_c02_bandwidth_never_exceeded():
    v = verdict("pipeline-totality")
    over = [r for r in v.records if r["max_bits"] > r["bandwidth"]]
    ok = v.passed and not over
    worst = max(r["max_bits"] / r["bandwidth"] for r in v.records)
    report("C2", ok, f"max bits per edge-round within budget on "
                     f"{len(v.records) - len(over)}/{len(v.records)} runs, "
                     f"worst fill {worst:.2f} (zero tolerance)")


def test_c03_restriction_identities():
    v = verdict("hash-identities")
    report("C3", v.passed,
           f"restriction/collision/hit-image identities exact on "
           f"{v.seeds - v.failures}/{v.seeds} random triples")


def test_c04_similarity_estimates():
    cells = by_prefix("similarity-")
    took = sum(_ELAPSED[v.name] for v in cells)
    ok = (len(cells) == 36 and all(v.passed for v in cells)
          and took <= 300.0)
    worst = min(v.measured for v in cells)
    report("C4", ok, f"overlap estimate within eps*size in >=90% per cell, "
                     f"{sum(v.passed for v in cells)}/36 cells "
                     f"(worst rate {worst:.3f}) in {took:.0f}s (cap 300s)")


def test_c05_joint_sample_agreement():
    cells = by_prefix("joint-sample-")
    ok = len(cells) == 24 and all(v.passed for v in cells)
    margin = min(v.measured - v.threshold for v in cells)
    report("C5", ok, f"matched common-element draws above 1-5eps/4-0.1, "
                     f"{sum(v.passed for v in cells)}/24 cells "
                     f"(min margin {margin:+.3f})")


def test_c06_multi_trial_failure_rate():
    cells = by_prefix("multi-trial-")
    specs = {s.name: s for s in trials.registry()}
    enough = all(specs[v.name].seeds * (1 if "adversarial" in v.name else 5)
                 >= 2000 for v in cells)
    ok = len(cells) == 20 and enough and all(v.passed for v in cells)
    worst = max(v.measured - v.threshold for v in cells)
    report("C6", ok, f"coloring-attempt failure <= (7/8)^x + 0.05 on both "
                     f"backends incl. adversarial transcripts, "
                     f"{sum(v.passed for v in cells)}/20 cells "
                     f"(worst slack {worst:+.3f})")


def test_c07_planted_gap_detection():
    cells = by_prefix("buddy-planted-")
    ok = len(cells) == 4 and all(v.passed for v in cells)
    caps = {(r["rounds"] <= r["cap"]) for v in cells for r in v.records}
    ok = ok and caps == {True}
    report("C7", ok, f"dense-vs-sparse planted gaps separated in >=99% "
                     f"per cell, {sum(v.passed for v in cells)}/4 cells, "
                     f"probe rounds under the fixed cap in every run")


def test_c08_acd_soundness():
    v = verdict("acd-planted")
    membership = [r["membership"] for r in v.records]
    mem_ok = sum(membership) / len(membership) >= 0.95
    ok = v.passed and mem_ok
    report("C8", ok, f"role labels match the oracle on {v.measured:.4f} of "
                     f"nodes (need 0.99); planted-block membership "
                     f"agreement {sum(membership) / len(membership):.4f} "
                     f"(need 0.95)")


def test_c09_leader_quality():
    v = verdict("leader-quality")
    report("C9", v.passed,
           f"leader slackability within 6x the clique average in "
           f"{v.measured:.3f} of seeds (need 0.95)")


def _gossip(ctx):
    if ctx.round <= 3:
        ctx.broadcast(Bits(ctx.rng.randbits(16), 16))
    else:
        ctx.state["sum"] = sum(m.payload.value for m in ctx.inbox)
        ctx.halt()


def test_c10_determinism():
    v = verdict("pipeline-determinism")
    sweeps = []
    for threads in (1, 4):
        states = [dict() for _ in range(64)]
        stats = run_rounds(Network(cycle(64), 99), _gossip, max_rounds=8,
                           threads=threads, states=states)
        sweeps.append((stats.transcript_hash,
                       tuple(s["sum"] for s in states)))
    ok = v.passed and sweeps[0] == sweeps[1]
    report("C10", ok, f"bit-identical transcripts on {v.seeds} repeated "
                      f"pipeline runs and across thread counts")


def test_c11_ecc_min_distance():
    cells = [verdict(f"ecc-min-distance-b{b}") for b in (8, 12, 16)]
    ok = all(v.passed for v in cells)
    report("C11", ok, "exhaustive code min weight >= b/2 for "
                      "b in {8, 12, 16} (zero tolerance)")
