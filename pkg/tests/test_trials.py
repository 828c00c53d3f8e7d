"""Tests for the trial harness: registry coverage, spec validation, the
runner protocol, report rendering, and the manifest round trip."""

from __future__ import annotations

import pytest

from congestcolor import trials
from congestcolor.trials import (CANONICAL_OPS, TrialSpec, corpus_instance,
                                 coverage_gaps, get_trial, parse_manifest,
                                 registry, render_report, resolve_op,
                                 run_trials, runner, write_manifest)


def spec_kw(**over):
    base = dict(name="t", kind="exact", runner="sampler_range",
                params=(("draws", 4), ("out_size", 8)), seeds=5, seed_base=0,
                statistic="success-rate", threshold=1.0, direction=">=",
                claim_note="note", exercises=("hashing.sample_multiset",))
    base.update(over)
    return base


def test_registry_covers_every_op():
    specs = registry()
    assert len(specs) >= 90
    assert coverage_gaps(specs) == []
    covered = set().union(*[set(s.exercises) for s in specs])
    assert set(CANONICAL_OPS) <= covered
    assert len({s.name for s in specs}) == len(specs)


def test_registry_seed_streams_disjoint():
    ranges = sorted((s.seed_base, s.seed_base + s.seeds) for s in registry())
    for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
        assert hi <= lo


def test_resolve_op_and_gaps():
    assert callable(resolve_op("pipeline.run_d1lc"))
    assert callable(resolve_op("runtime.NodeCtx.send"))
    with pytest.raises(AttributeError):
        resolve_op("pipeline.no_such_thing")
    lonely = TrialSpec(**spec_kw(exercises=("hashing.sample_multiset",
                                            "probe.not_real")))
    gaps = coverage_gaps([lonely])
    assert any("not_real" in g for g in gaps)
    assert any("pipeline.run_d1lc" in g for g in gaps)


def test_spec_validation():
    with pytest.raises(ValueError):
        TrialSpec(**spec_kw(kind="vibes"))
    with pytest.raises(ValueError):
        TrialSpec(**spec_kw(direction="=="))
    with pytest.raises(ValueError):
        TrialSpec(**spec_kw(statistic="median"))
    with pytest.raises(ValueError):
        TrialSpec(**spec_kw(seeds=0))
    with pytest.raises(ValueError):
        TrialSpec(**spec_kw(kind="statistical", seeds=500))
    TrialSpec(**spec_kw(kind="statistical", seeds=500, pinned=True))
    with pytest.raises(ValueError):
        TrialSpec(**spec_kw(threshold=0.9))


def test_get_trial():
    assert get_trial("runtime-echo").runner == "runtime_echo"
    with pytest.raises(KeyError):
        get_trial("no-such-trial")


def test_exact_trials_pass():
    for name in ("sampler-range", "runtime-echo", "hash-identities",
                 "sketch-wire-parity", "color-hash-wire",
                 "low-collision-search", "ecc-min-distance-b8"):
        verdict = run_trials(get_trial(name))
        assert verdict.passed, name
        assert verdict.failures == 0
        assert verdict.measured == 1.0


def test_statistical_cells_pass():
    sim = run_trials(get_trial("similarity-eps0.2-n200-ov0.5"))
    assert sim.passed and sim.measured >= 0.9
    joint = run_trials(get_trial("joint-sample-eps0.2-n50-ov1.0"))
    assert joint.passed and joint.measured >= joint.threshold


def test_run_trials_protocol_and_records():
    calls = []

    @runner("flaky_for_test")
    def flaky(params, seed):
        calls.append(seed)
        return (seed != 3, {"seed": seed})

    spec = TrialSpec(**spec_kw(runner="flaky_for_test", seeds=5))
    verdict = run_trials(spec)
    assert calls == [0, 1, 2, 3, 4]
    assert not verdict.passed  # exact: one bad seed sinks it
    assert verdict.failures == 1
    assert verdict.measured == pytest.approx(0.8)
    assert [r["seed"] for r in verdict.records] == [0, 1, 2, 3, 4]

    @runner("mean_for_test")
    def mean_val(params, seed):
        return float(seed)

    spec = TrialSpec(**spec_kw(runner="mean_for_test", kind="statistical",
                               seeds=5, pinned=True, statistic="mean",
                               threshold=2.5, direction="<="))
    verdict = run_trials(spec)
    assert verdict.measured == pytest.approx(2.0)
    assert verdict.passed


def test_render_report_lines():
    verdict = run_trials(get_trial("sampler-range"))
    text = render_report([verdict])
    assert "PASS sampler-range [exact]" in text
    base = get_trial("sampler-range").seed_base
    assert f"(seeds {base}..{base + 63})" in text


def test_manifest_round_trip(tmp_path):
    path = str(tmp_path / "trials.manifest")
    write_manifest(registry(), path)
    back = parse_manifest(path)
    assert back == registry()


def test_corpus_instances_shape():
    families = set()
    for idx in list(range(0, 195, 7)) + [195, 196, 197, 198, 199]:
        g, palettes, overrides, meta = corpus_instance(idx, seed=idx)
        assert g.n <= 4000
        assert len(palettes) == g.n
        assert all(len(palettes[v]) >= g.degree(v) + 1 for v in range(g.n))
        families.add(meta["family"])
    assert families >= {"gnp", "clique-union", "star", "tree", "planted-acd"}
