"""End-to-end acceptance checks. Each test records one PASS/FAIL line,
printed in the ``acceptance criteria`` section at the end of the run.

    pytest tests/test_acceptance.py -v
"""

import csv
import io
import time
from dataclasses import replace

import numpy as np
import pytest

from rlnc_offload import cli
from rlnc_offload.analytic import evaluate, p_full_rank, sweep
from rlnc_offload.config import load
from rlnc_offload.gf import FieldSpec, batch_rank
from rlnc_offload.rlnc import DecoderState, SourceMessage, encode_packet, reassemble_stream, segment_stream

pytestmark = pytest.mark.slow

DEFAULT = load("default.cfg").scenario


@pytest.fixture(scope="module")
def figure_sweeps():
    start = time.perf_counter()
    rows = {name: cli.sweep_rows(load(name)) for name in ("fig1.cfg", "fig2.cfg")}
    return rows, time.perf_counter() - start


def test_full_rank_law(record_criterion):
    start = time.perf_counter()
    trials, worst, ok = 100_000, 0.0, True
    parts = []
    for seed, (n, K, q) in enumerate([(10, 10, 2), (12, 10, 2), (10, 10, 256)]):
        rng = np.random.default_rng(seed)
        coeffs = rng.integers(0, q, size=(trials, n, K), dtype=np.uint8)
        freq = float(np.mean(batch_rank(FieldSpec(q), coeffs) == K))
        p = p_full_rank(n, K, q)
        z = abs(freq - p) / np.sqrt(p * (1 - p) / trials)
        ok &= z <= 3
        worst = max(worst, z)
        parts.append(f"({n},{K},{q}) freq={freq:.5f} p={p:.5f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    record_criterion(1, "full-rank law", ok, f"{'; '.join(parts)}; max z={worst:.2f}; {elapsed:.1f}s")
    assert ok


def test_codec_round_trip(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    combos = [(K, q) for K in (2, 10, 40) for q in (2, 256)]
    count = bad = 0
    for i in range(1000):
        K, q = combos[i % len(combos)]
        plen = int(rng.integers(1, 33))
        field = FieldSpec(q)
        data = rng.integers(0, q, size=int(rng.integers(1, K * plen + 1)), dtype=np.uint8)
        (msg,) = segment_stream(data, K, plen)
        dec = DecoderState(msg.index, K, field, plen)
        pkts = [encode_packet(msg, field, rng) for _ in range(K + 20)]
        for j in rng.permutation(len(pkts)):
            dec.ingest(pkts[j])
            if dec.decodable:
                break
        out = reassemble_stream([SourceMessage(msg.index, dec.extract())], data.size)
        bad += not np.array_equal(out, data)
        count += 1
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 60
    record_criterion(2, "codec round trip", ok, f"{count - bad}/{count} messages bit-exact; {elapsed:.1f}s")
    assert ok


def test_analytic_monte_carlo_agreement(figure_sweeps, record_criterion):
    rows, elapsed = figure_sweeps
    points = [r for rs in rows.values() for r in rs]
    misses, worst = [], 0.0
    for r in points:
        for mc, exact, ci, label in ((r.D_mc, r.D_analytic, r.ci_D, "D"), (r.I_mc, r.I_analytic, r.ci_I, "I")):
            ratio = abs(mc - exact) / ci
            worst = max(worst, ratio)
            if ratio > 3:
                misses.append(f"{label} q={r.q} K={r.K} d={r.d} C={r.C} N-K={r.overhead}")
    trials = {r.trials for r in points}
    ok = not misses and trials == {10_000} and elapsed < 600
    detail = f"{len(points)} points at {sorted(trials)} trials, max |diff|/ci={worst:.2f}, {elapsed:.0f}s"
    if misses:
        detail += f"; outside 3 ci: {', '.join(misses[:5])}"
    record_criterion(3, "analytic vs Monte Carlo", ok, detail)
    assert ok


def test_spreading_effect(record_criterion):
    cfg = replace(DEFAULT, q=2, K=10, N=20, d=1)
    i2, i4 = evaluate(replace(cfg, C=2)).I, evaluate(replace(cfg, C=4)).I
    ok = i2 - i4 >= 0.2 and i4 <= 0.01
    record_criterion(4, "spreading effect", ok, f"I(C=2)={i2:.4f} I(C=4)={i4:.4f} gap={i2 - i4:.4f}")
    assert ok


def test_recovery_insensitive_to_spreading(record_criterion):
    Ks = (10, 15, 20, 30, 40)
    pts = {
        (p.q, p.K, p.C, p.overhead): p.D
        for p in sweep(DEFAULT, range(11), qs=(2, 256), Ks=Ks, ds=(1,), Cs=(2, 4))
    }
    diff = max(abs(pts[q, K, 4, o] - pts[q, K, 2, o]) for q in (2, 256) for K in Ks for o in range(11))
    floor = min(pts[q, K, 4, o] for q in (2, 256) for K in (20, 30, 40) for o in range(6, 11))
    ok = diff <= 0.05 and floor > 0.85
    record_criterion(5, "recovery insensitivity", ok, f"max |D(C=4)-D(C=2)|={diff:.4f}; min D(C=4, N-K>5)={floor:.4f}")
    assert ok


def test_field_size_effect(figure_sweeps, record_criterion):
    rows, _ = figure_sweeps
    by_key = {(r.K, r.d, r.C, r.overhead, r.q): r for rs in rows.values() for r in rs}
    violations = []
    for (K, d, C, o, q), r2 in by_key.items():
        if q != 2:
            continue
        r256 = by_key[K, d, C, o, 256]
        if r256.D_analytic < r2.D_analytic - 1e-12 or r256.I_analytic < r2.I_analytic - 1e-12:
            violations.append(f"K={K} d={d} C={C} N-K={o}")
    base = {q: by_key[10, 1, 2, 0, q] for q in (2, 256)}
    d_gap = base[256].D_analytic - base[2].D_analytic
    i_gap = base[256].I_analytic - base[2].I_analytic
    ok = not violations and d_gap > 0.01 and i_gap > 0.01
    detail = (
        f"{len(violations)} ordering violations; at N-K=0, K=10: "
        f"D gap={d_gap:.4f}, I gap={i_gap:.4f} (I={base[2].I_analytic:.4f} vs {base[256].I_analytic:.4f})"
    )
    record_criterion(6, "field-size effect", ok, detail)
    assert ok


def test_interleaving_effect(record_criterion):
    cfg = replace(DEFAULT, q=2, C=4)
    I = {(K, d): evaluate(replace(cfg, K=K, N=K + 10, d=d)).I for K in (20, 30, 40) for d in (1, 5)}
    avg = {K: (I[K, 1] + I[K, 5]) / 2 for K in (20, 30, 40)}
    ok = avg[40] <= avg[20] and all(I[K, 5] <= I[K, 1] for K in (20, 30, 40))
    detail = " ".join(f"I(K={K},d={d})={v:.4f}" for (K, d), v in sorted(I.items()))
    record_criterion(7, "interleaving effect", ok, detail)
    assert ok


def test_sweep_is_deterministic(tmp_path, monkeypatch, record_criterion):
    outs = []
    for i, threads in enumerate(("1", "4")):
        monkeypatch.setenv("RLNC_OFFLOAD_THREADS", threads)
        dest = tmp_path / f"run{i}.csv"
        assert cli.main(["sweep", "--config", "default.cfg", "--out", str(dest)]) == 0
        outs.append(dest.read_bytes())
    rows = list(csv.reader(io.StringIO(outs[0].decode())))
    ok = outs[0] == outs[1] and len(rows) > 1
    record_criterion(8, "determinism", ok, f"{len(rows) - 1} rows, {len(outs[0])} bytes, identical={outs[0] == outs[1]}")
    assert ok
