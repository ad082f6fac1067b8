"""Acceptance gate: every release criterion runs here at its stated
tolerance and reports one machine-greppable pass/fail line."""

import time
from pathlib import Path

import numpy as np
import pytest

from hydramon.decompose import BatemanParams, DecomposeConfig, cda, convolve_driver, dda, deconvolve
from hydramon.features import (
    FEATURE_COLUMNS,
    FeaturizeConfig,
    dataset_from_csv,
    dataset_to_csv,
    featurize_session,
)
from hydramon.learn import ModelSpec, cross_validate, render_report
from hydramon.preprocess import (
    PreprocessConfig,
    StreamingLowpass,
    butterworth_lowpass,
    preprocess_pipeline,
)
from hydramon.signal_core import HydrationLevel, SampleSeries, SessionRecording
from hydramon.stream import StateMachine, StreamConfig, WindowPrediction, batch_predict, replay

from conftest import (
    PARAMS,
    RATE,
    annotated_ramp_session,
    flat_session,
    make_kernel,
    scr_recovery_signal,
    synthetic_feature_dataset,
)
from test_stream import reference_alert_indices

GOLDEN_DIR = Path(__file__).parent / "golden"

# Frozen analysis configuration for the synthetic recovery corpus.
CORPUS_PRE = PreprocessConfig(cutoff_hz=0.5, filter_order=2)
CORPUS_DEC = DecomposeConfig(amp_threshold=0.035, onset_fraction=0.1,
                             driver_smooth_s=1.0, mask_threshold=0.004)

# Shared live-scenario configuration (see test_stream.py).
LIVE_DECOMPOSE = DecomposeConfig(mask_threshold=0.01)


def report(name: str, detail: str = ""):
    """Context guard that prints one pass/fail line per criterion."""
    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            suffix = f"  ({detail})" if detail else ""
            print(f"[{status}] {name}{suffix}")
            return False
    return _Guard()


def test_deconvolution_round_trip():
    kernel = make_kernel()
    rng = np.random.default_rng(0)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(200, 1200))
        driver = np.zeros(n)
        k = int(rng.integers(1, 20))
        driver[rng.integers(0, n, k)] = rng.uniform(0.0, 5.0, k)
        signal = SampleSeries(0.0, RATE, convolve_driver(driver, kernel))
        back = deconvolve(signal, kernel).values
        worst = max(worst, float(np.abs(back - driver).max()))
    elapsed = time.perf_counter() - t0
    with report("deconvolution round trip",
                f"max err {worst:.2e}, {elapsed:.2f} s for 100 trains"):
        assert worst < 1e-6
        assert elapsed < 1.0


def test_cda_synthetic_recovery():
    n_seeds = 100
    worst_onset = worst_amp = worst_resid = 0.0
    t0 = time.perf_counter()
    for seed in range(n_seeds):
        series, onsets, amps = scr_recovery_signal(seed)
        rec = SessionRecording(f"s{seed}", "synthetic", series)
        prepped = preprocess_pipeline(rec, CORPUS_PRE)
        decomp = cda(prepped, PARAMS, CORPUS_DEC)
        assert len(decomp.scrs) == len(onsets), \
            f"seed {seed}: {len(decomp.scrs)} SCRs, expected {len(onsets)}"
        for event, onset_idx, amp in zip(decomp.scrs, onsets, amps):
            onset_err = abs(event.onset - onset_idx / RATE)
            amp_err = abs(event.amplitude - amp) / amp
            worst_onset = max(worst_onset, onset_err)
            worst_amp = max(worst_amp, amp_err)
            assert onset_err <= 1.0 / RATE + 1e-9, f"seed {seed}"
            assert amp_err <= 0.10, f"seed {seed}"
        p2p = float(prepped.values.max() - prepped.values.min())
        resid = decomp.residual_rms / p2p
        worst_resid = max(worst_resid, resid)
        assert resid <= 0.02, f"seed {seed}"
    per_session = (time.perf_counter() - t0) / n_seeds
    with report("CDA synthetic recovery",
                f"{n_seeds} sessions: count exact, onset <= "
                f"{worst_onset:.2f} s, amp err <= {worst_amp:.1%}, "
                f"residual <= {worst_resid:.2%} p2p, "
                f"{per_session * 1e3:.0f} ms/session"):
        assert per_session < 5.0


def test_dda_nonnegativity():
    worst = 0.0
    for seed in range(100):
        series, _, _ = scr_recovery_signal(seed)
        rec = SessionRecording(f"s{seed}", "synthetic", series)
        decomp = dda(preprocess_pipeline(rec, CORPUS_PRE), PARAMS, CORPUS_DEC)
        worst = min(worst, float(decomp.driver.values.min()))
    # adversarial: abrupt negative conductance steps
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(90 * RATE)
        values = np.full(n, 2.0)
        for _ in range(int(rng.integers(1, 4))):
            values[int(rng.integers(n // 4, n)):] -= rng.uniform(0.2, 1.0)
        decomp = dda(SampleSeries(0.0, RATE, np.maximum(values, 0.05)), PARAMS)
        worst = min(worst, float(decomp.driver.values.min()))
    with report("DDA nonnegativity", f"min driver {worst:.1e} over corpus "
                "plus adversarial negative steps"):
        assert worst >= -1e-9


def test_filter_contract():
    # DC gain
    dc = butterworth_lowpass(SampleSeries(0.0, RATE, np.full(400, 3.0)),
                             1.0, order=1).values
    dc_err = float(np.abs(dc - 3.0).max()) / 3.0
    # -3 dB at cutoff (steady state of a generated sinusoid)
    rate, cutoff = 32.0, 1.0
    t = np.arange(int(120 * rate)) / rate
    worst_db = 0.0
    for order in (1, 2):
        out = butterworth_lowpass(
            SampleSeries(0.0, rate, np.sin(2 * np.pi * cutoff * t)),
            cutoff, order=order).values
        tail = out[len(out) // 2:]
        gain_db = 20 * np.log10((tail.max() - tail.min()) / 2.0)
        worst_db = max(worst_db, abs(gain_db + 3.01))
    # causal prefix: filtering a prefix equals the prefix of the filtered whole
    rng = np.random.default_rng(2)
    values = rng.normal(1.0, 0.3, 500)
    full = butterworth_lowpass(SampleSeries(0.0, RATE, values), 0.5, 2).values
    prefix = butterworth_lowpass(SampleSeries(0.0, RATE, values[:300]),
                                 0.5, 2).values
    causal_exact = bool(np.array_equal(full[:300], prefix))
    # and the incremental variant is bit-identical to batch
    stream = StreamingLowpass(RATE, 0.5, 2)
    chunked = np.concatenate([stream.push(c)
                              for c in np.array_split(values, 11)])
    streaming_exact = bool(np.array_equal(chunked, full))
    with report("filter contract",
                f"DC err {dc_err:.1e}, cutoff within {worst_db:.2f} dB of "
                f"-3 dB, causal prefix exact={causal_exact}, "
                f"streaming exact={streaming_exact}"):
        assert dc_err < 1e-6
        assert worst_db <= 0.5
        assert causal_exact and streaming_exact


def test_feature_layout():
    rec = annotated_ramp_session()
    prepped = SessionRecording(rec.id, rec.subject, preprocess_pipeline(rec),
                               annotations=rec.annotations)
    data = featurize_session(prepped, FeaturizeConfig())
    # std^2 == var for every emitted vector
    worst = 0.0
    for row in data.rows:
        err = float(np.abs(row.values[2::3] ** 2 - row.values[1::3]).max())
        worst = max(worst, err)
    assert worst < 1e-9
    # permutation invariance of aggregation over sub-windows
    from hydramon.features import BaseFeatures, aggregate
    rng = np.random.default_rng(3)
    perm_ok = True
    for _ in range(50):
        rows = [BaseFeatures(*rng.normal(0, 1, 12)) for _ in range(13)]
        order = rng.permutation(13)
        a = aggregate(rows)
        b = aggregate([rows[i] for i in order])
        perm_ok &= bool(np.allclose(a.values, b.values, rtol=0, atol=1e-12))
    # CSV round trip bit-exact
    back = dataset_from_csv(dataset_to_csv(data))
    exact = all(np.array_equal(a.values, b.values)
                and (a.label, a.session, a.window_start)
                == (b.label, b.session, b.window_start)
                for a, b in zip(data.rows, back.rows))
    with report("feature layout",
                f"{len(data)} vectors: std^2==var within {worst:.1e}, "
                f"permutation invariant={perm_ok}, CSV bit-exact={exact}"):
        assert perm_ok
        assert exact


def test_learning_sanity():
    data = synthetic_feature_dataset()  # tonic means 1.0/1.5/2.0/2.5, std 0.1
    t0 = time.perf_counter()
    accs = {}
    for kind, floor in (("tree", 0.95), ("forest", 0.95), ("nbayes", 0.90)):
        rep = cross_validate(data, ModelSpec(kind=kind), k=10, seed=0)
        accs[kind] = rep.accuracy[0]
        assert rep.accuracy[0] >= floor, kind
        # independent recount from raw per-fold records
        fold_accs = []
        confusion = np.zeros((4, 4), dtype=int)
        for true, pred in rep.fold_records:
            true, pred = np.asarray(true), np.asarray(pred)
            fold_accs.append(float(np.mean(true == pred)))
            for t_lv, p_lv in zip(true, pred):
                confusion[t_lv, p_lv] += 1
        assert np.mean(fold_accs) == pytest.approx(rep.accuracy[0], abs=0)
        assert np.std(fold_accs) == pytest.approx(rep.accuracy[1], abs=0)
        assert np.array_equal(confusion, rep.confusion.astype(int))
    elapsed = time.perf_counter() - t0
    with report("learning sanity",
                "10-fold CV acc " + ", ".join(
                    f"{k} {v:.3f}" for k, v in accs.items())
                + f"; recount exact; {elapsed:.1f} s"):
        assert elapsed < 10.0


@pytest.fixture(scope="module")
def live_model():
    rec = annotated_ramp_session()
    prepped = SessionRecording(rec.id, rec.subject, preprocess_pipeline(rec),
                               annotations=rec.annotations)
    data = featurize_session(prepped, FeaturizeConfig(decompose=LIVE_DECOMPOSE))
    return ModelSpec(kind="tree").train(data)


def test_stream_batch_equivalence(live_model):
    config = StreamConfig()
    mismatches = 0
    n_preds = 0
    for seed in range(20):
        rec = flat_session(100 + seed)
        streamed = replay(rec, live_model, config).predictions
        batched = batch_predict(rec, live_model, config)
        assert len(streamed) == len(batched)
        n_preds += len(streamed)
        mismatches += sum(
            s.time != b.time or s.level != b.level or s.confidence != b.confidence
            for s, b in zip(streamed, batched))
    with report("stream/batch equivalence",
                f"20 sessions, {n_preds} predictions, {mismatches} mismatches"):
        assert mismatches == 0


def test_state_machine():
    rng = np.random.default_rng(4)
    n_seq = 10_000
    mismatches = 0
    for _ in range(n_seq):
        debounce_n = int(rng.integers(1, 6))
        levels = rng.integers(0, 4, int(rng.integers(1, 30))).tolist()
        machine = StateMachine(debounce_n)
        fired = []
        for i, lv in enumerate(levels):
            pred = WindowPrediction(time=float(i), window_start=float(i) - 5.0,
                                    level=HydrationLevel(lv), confidence=1.0)
            if machine.advance(pred) is not None:
                fired.append(i)
        if fired != reference_alert_indices(levels, debounce_n):
            mismatches += 1
    # debounce_n=1 alerts on every change after startup
    machine = StateMachine(1)
    seq = [0, 1, 1, 2, 3, 0, 0, 2]
    changes = 0
    for i, lv in enumerate(seq):
        pred = WindowPrediction(time=float(i), window_start=float(i) - 5.0,
                                level=HydrationLevel(lv), confidence=1.0)
        changes += machine.advance(pred) is not None
    with report("state machine",
                f"{n_seq} random sequences vs reference, {mismatches} "
                f"mismatches; debounce 1 fired {changes} alerts"):
        assert mismatches == 0
        assert changes == 5  # every level change after the silent start


def test_self_consistency_end_to_end(live_model):
    rec = annotated_ramp_session()
    config = StreamConfig(decompose=LIVE_DECOMPOSE)
    summary = replay(rec, live_model, config)
    budget = 5.0 * config.debounce_n
    transitions = rec.annotations.transitions
    matched = []
    for t_true, level in transitions:
        hits = [a for a in summary.alerts
                if a.to_level == level and t_true <= a.time <= t_true + budget]
        matched.append(bool(hits))
    spurious = len(summary.alerts) - len(transitions)
    delays = [a.time - t for a, (t, _) in zip(summary.alerts, transitions)]
    with report("self-consistency end-to-end",
                f"{sum(matched)}/{len(transitions)} transitions alerted "
                f"within {budget:.0f} s (delays {delays}), "
                f"{max(spurious, 0)} spurious"):
        assert all(matched)
        assert len(summary.alerts) == len(transitions)


def test_report_parity():
    data = synthetic_feature_dataset()
    reports = {kind: cross_validate(data, ModelSpec(kind=kind), k=10, seed=0)
               for kind in ("tree", "forest", "nbayes")}
    table = render_report(reports)
    golden = (GOLDEN_DIR / "report_table.txt").read_text()
    lines = table.splitlines()
    structural = (
        all(name in lines[0]
            for name in ("Decision Tree", "Random Forest", "Naive Bayes"))
        and lines[1].startswith("Accuracy")
        and lines[2].startswith("Sensitivity")
        and lines[3].startswith("Specificity")
    )
    with report("report parity",
                f"structure ok={structural}, golden match={table == golden}"):
        assert structural
        assert table == golden
