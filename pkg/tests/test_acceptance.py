"""Acceptance criteria, each run at its stated tolerance.

Every test records a single PASS/FAIL line, printed in the terminal summary
(and immediately with ``-s``).
"""

from __future__ import annotations

import subprocess
import sys
import time

import numpy as np

from streamov.backbone import StubBackbone
from streamov.config import Config, TriggerConfig
from streamov.evidence import Route, evidence_from_normalized
from streamov.harness.engine import run_session, stream_session
from streamov.harness.evaluation import TriggerMetrics, metrics_from_labels
from streamov.harness.synthetic import SynthConfig, gen_synthetic_session
from streamov.memory import LongTermBuffer, MemoryEntry, update_long
from streamov.metrics import rank_normalize
from streamov.oracle import fd_gradients, global_topk, naive_fuse, relative_error
from streamov.trigger import (
    DatasetConfig,
    TriggerParams,
    build_trigger_dataset,
    predict,
    train_trigger,
    trigger_backward,
)

from .conftest import ACCEPTANCE

FIELDS = ("s_qa_gated", "e_v", "e_a", "e_av", "e_v_hat", "e_a_hat", "base")


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title} ({detail})"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def test_c01_evidence_algebra():
    rng = np.random.default_rng(20240601)
    tuples = rng.random((100_000, 5)).tolist()
    start = time.perf_counter()
    worst = 0.0
    violations = 0
    for s_qv, s_v, s_qa, s_a, s_cob in tuples:
        ev = evidence_from_normalized(0, 0.0, s_v, s_a, s_cob, s_qv, s_qa)
        ref = naive_fuse(s_qv, s_v, s_qa, s_a, s_cob)
        if not ev.e_av <= min(ev.e_v, ev.e_a):
            violations += 1
        # the [.]_+ clamp must be inactive
        if ev.e_v_hat != ev.e_v - ev.e_av or ev.e_a_hat != ev.e_a - ev.e_av:
            violations += 1
        if not (0.0 <= ev.base <= 1.0 and ev.base <= max(ev.e_v, ev.e_a)):
            violations += 1
        if ev.route.value != ref.route:
            violations += 1
        for f in FIELDS:
            worst = max(worst, abs(getattr(ev, f) - float(getattr(ref, f))))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and worst <= 1e-12 and elapsed < 5.0
    record(1, "evidence algebra on 1e5 tuples", ok, f"violations={violations} max|diff|={worst:.2e} {elapsed:.2f}s")


def test_c02_streaming_topk_exact():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    mismatches = 0
    checks = 0
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        k = int(rng.integers(1, 9))
        # a coarse grid makes ties common
        bs = rng.integers(0, 6, n) / 5.0
        buf = LongTermBuffer(k)
        history = []
        for i in range(n):
            e = MemoryEntry(i, float(i), Route.ALIGNED, float(bs[i]))
            update_long(buf, [e])
            history.append((i, e.t, e.base))
            checks += 1
            mismatches += buf.ids() != global_topk(history, k)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10.0
    record(2, "streaming Top-K_L equals offline Top-K on every prefix", ok,
           f"{checks} prefixes, mismatches={mismatches} {elapsed:.2f}s")


def test_c03_rank_normalization():
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 33))
        raws = (rng.integers(0, 8, n) / 7.0 if rng.random() < 0.5 else rng.random(n)).tolist()
        out = rank_normalize(raws)
        if n == 1:
            bad += out != [1.0]
            continue
        bad += sorted(out) != [r / (n - 1) for r in range(n)]
        for i in range(n):
            for j in range(n):
                if raws[i] < raws[j] and not out[i] < out[j]:
                    bad += 1
        perm = rng.permutation(n)
        times = list(range(n))
        shuffled = rank_normalize([raws[p] for p in perm], [times[p] for p in perm])
        bad += shuffled != [out[p] for p in perm]
    record(3, "rank normalization on 1e4 windows", bad == 0, f"failures={bad}")


def test_c04_gradient_check():
    rng = np.random.default_rng(4)
    worst = 0.0
    for trial in range(100):
        k = (1, 4)[trial % 2]
        p = TriggerParams.init(16, 32, trial)
        p.q_tr = rng.standard_normal(16)
        p.b1 = rng.standard_normal(32) * 0.1
        p.b2 = rng.standard_normal(2) * 0.1
        hs = rng.standard_normal((k, 16))
        label = int(rng.integers(2))
        ana = trigger_backward(p, hs, label)
        num = fd_gradients(p, hs, label, 1e-5)
        worst = max(worst, max(relative_error(ana[n], num[n]) for n in ana))
    record(4, "trigger gradients vs central differences", worst < 1e-5, f"max rel err={worst:.2e}")


def harvest(seeds, backbone, cfg, counts):
    sc = SynthConfig(n_obs=320, n_queries=40, emb_dim=cfg.emb_dim, embed_seed=cfg.backbone.seed)
    return build_trigger_dataset((gen_synthetic_session(s, sc).script for s in seeds), backbone, cfg, counts)


def test_c05_trigger_learnability():
    cfg = Config()
    assert (cfg.trigger.lr, cfg.trigger.batch, cfg.trigger.epochs) == (3e-4, 32, 20)
    start = time.perf_counter()
    bb = StubBackbone(cfg.emb_dim, cfg.trigger.d, cfg.backbone.seed, cfg.backbone.evidence_gain)
    train = harvest(range(0, 10_000), bb, cfg, DatasetConfig(2500, 2500))
    params, history = train_trigger(train, cfg.trigger)
    elapsed = time.perf_counter() - start
    # held-out sessions come from seeds never used for training
    held = harvest(range(50_000, 60_000), bb, cfg, DatasetConfig(500, 500))
    m = metrics_from_labels(predict(params, held), held.labels)
    counts = (int(train.labels.sum()), int(len(train) - train.labels.sum()))
    ok = counts == (2500, 2500) and len(history) <= 20 and m.macro_f1 >= 0.95 and elapsed < 60.0
    record(5, "trigger learnability", ok,
           f"train {counts[0]}/{counts[1]}, held-out macro-F1={m.macro_f1:.4f}, {len(history)} epochs, {elapsed:.1f}s")


def test_c06_metric_identity():
    from_rates = TriggerMetrics.from_rates(0.861, 0.983, 0.978, 0.821).macro_f1
    from_counts = TriggerMetrics.from_confusion(tp=118, fp=19, fn=2, tn=87)
    ok = abs(from_rates - 0.905) <= 5e-4 and abs(from_counts.macro_f1 - 0.905) <= 5e-4
    ok = ok and [round(x, 3) for x in (from_counts.precision_1, from_counts.recall_1,
                                        from_counts.precision_0, from_counts.recall_0)] == [0.861, 0.983, 0.978, 0.821]
    record(6, "macro-F1 identity", ok, f"rates->{from_rates:.5f} confusion->{from_counts.macro_f1:.5f}")


def test_c07_budget_safety():
    violations = 0
    steps = 0
    for budget in (64, 32):
        for s in range(100):
            sc = SynthConfig(n_obs=150, n_queries=6, distractor_ratio=int(s % 11), emb_dim=16,
                             grid=(4, 4), sample_rate=64)
            script = gen_synthetic_session(s, sc).script
            cfg = Config(window_w=4 + s % 13, budget=budget, emb_dim=16, trigger=TriggerConfig(d=32))
            bb = StubBackbone(16, 32)
            for state, arriving, engine in stream_session(script, cfg, bb):
                steps += 1
                if len(state.snapshot) > budget or len(state.short) > cfg.short_k or len(state.long) > cfg.long_k:
                    violations += 1
                if len(engine.payloads) > budget + cfg.window_w:
                    violations += 1
    record(7, "budget safety at 64 and 32", violations == 0, f"{steps} steps, violations={violations}")


def test_c08_retention_under_distraction():
    w = 11  # the window must span one event gap (distractor_ratio + 1)
    present = total = 0
    shortfall = 0
    for s in range(20):
        sc = SynthConfig(n_obs=221, n_queries=12, distractor_ratio=10, emb_dim=16, grid=(4, 4), sample_rate=64)
        syn = gen_synthetic_session(s, sc)
        n_events = len(syn.event_ids)
        ratio = (sc.n_obs - n_events) / n_events
        assert ratio >= 9.5
        bb = StubBackbone(16, 32)
        # K_L >= #events: every planted observation is in memory when its query arrives
        cfg = Config(window_w=w, budget=32, k_s=8, k_l=24, emb_dim=16, trigger=TriggerConfig(d=32))
        assert cfg.long_k >= n_events
        for state, arriving, _ in stream_session(syn.script, cfg, bb):
            ids = set(state.snapshot.ids())
            for j in arriving:
                target = syn.evidence[j]
                if target is not None:
                    total += 1
                    present += target in ids
        # K_L = #events / 2: long-term memory keeps as many events as any K_L selection could
        half = Config(window_w=w, budget=32, k_s=8, k_l=n_events // 2, emb_dim=16, trigger=TriggerConfig(d=32))
        events = set(syn.event_ids)
        outgoing: list[tuple[int, float, float]] = []
        bases: dict[int, float] = {}
        for state, _, engine in stream_session(syn.script, half, bb):
            bases[state.observation.id] = state.entry.base
            i = state.index - w  # the observation that left the window this step
            if i >= 0:
                outgoing.append((i, float(i), bases[i]))
            kept = engine.long.ids()
            best = global_topk(outgoing, half.long_k) if outgoing else set()
            achievable = min(half.long_k, len(events & {o[0] for o in outgoing}))
            if kept != best or len(kept & events) < achievable:
                shortfall += 1
    ok = present == total and shortfall == 0
    record(8, "retention under 10:1 distraction", ok, f"{present}/{total} planted evidence retained, K_L/2 shortfalls={shortfall}")


def test_c09_throughput():
    sc = SynthConfig(n_obs=10_000, n_queries=100, emb_dim=64)
    script = gen_synthetic_session(9, sc).script
    cfg = Config(window_w=8, budget=64)
    bb = StubBackbone(cfg.emb_dim, cfg.trigger.d)
    start = time.perf_counter()
    trace = run_session(script, cfg, bb)
    elapsed = time.perf_counter() - start
    ok = len(trace.steps) == 10_000 and elapsed < 5.0
    record(9, "throughput on 1e4 observations", ok, f"{elapsed:.2f}s")


def cli(*args: str) -> None:
    subprocess.run([sys.executable, "-m", "streamov.cli", *args], check=True, capture_output=True)


def test_c10_determinism(tmp_path):
    config = tmp_path / "config.json"
    config.write_text('{"emb_dim": 32, "budget": 32, "trigger": {"d": 64, "h": 32, "epochs": 3}}')
    sessions = tmp_path / "sessions"
    sessions.mkdir()
    for s in range(2):
        cli("gen", "--seed", str(s), "--n-obs", "120", "--n-queries", "10", "--emb-dim", "32",
            "--out", str(sessions / f"{s}.jsonl"))
    trigger = tmp_path / "trigger.json"
    cli("train-trigger", "--sessions", str(sessions), "--config", str(config), "--out", str(trigger))
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        for s in range(2):
            cli("run", "--session", str(sessions / f"{s}.jsonl"), "--config", str(config),
                "--trigger", str(trigger), "--out", str(out))
        cli("eval", "--traces", str(out), "--out", str(out / "metrics.json"))
        outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.json*"))})
    a, b = outputs
    ok = a.keys() == b.keys() and all(a[k] == b[k] for k in a) and len(a) == 3
    record(10, "byte-identical traces and metrics across runs", ok, f"files={sorted(a)}")
