"""Real-time path: sample ingestion, rolling context buffer, windowed
inference, and the debounced hydration-state machine.

The engine filters incrementally (identical output to batch filtering of
the whole stream), keeps a bounded buffer of filtered samples with enough
margin that centered smoothing of the decomposition context matches the
offline computation exactly, and runs one inference per completed activity
window once the context has filled.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .decompose import BatemanParams, DecomposeConfig, cda, dda
from .errors import TimestampRegression
from .features import WindowSpec, aggregate, base_features, sub_window_spans
from .learn import HydrationModel, predict
from .preprocess import PreprocessConfig, StreamingLowpass, smooth_array
from .signal_core import (
    ArtifactSpan,
    HydrationLevel,
    SampleSeries,
    SessionRecording,
)

SMOOTH_MARGIN = 8  # extra buffered samples so context smoothing has full support


@dataclass(frozen=True)
class WindowPrediction:
    time: float                 # boundary (window end) time
    window_start: float
    level: HydrationLevel
    confidence: float

    def to_json(self) -> dict:
        return {"type": "prediction", "time": self.time,
                "window_start": self.window_start, "level": int(self.level),
                "confidence": self.confidence}


@dataclass(frozen=True)
class AlertEvent:
    time: float
    from_level: HydrationLevel
    to_level: HydrationLevel
    confidence: float
    message: str

    def __post_init__(self):
        if self.from_level == self.to_level:
            raise ValueError("alert requires a level change")

    def to_json(self) -> dict:
        return {"type": "alert", "time": self.time,
                "from_level": int(self.from_level), "to_level": int(self.to_level),
                "confidence": self.confidence, "message": self.message}


class StateMachine:
    """Debounced level tracker.

    A novel level must be predicted ``debounce_n`` times in a row to take
    effect; the first debounced level sets the state silently (a change
    needs a prior state).  ``debounce_n=1`` alerts on every change.
    """

    def __init__(self, debounce_n: int = 3):
        if debounce_n < 1:
            raise ValueError("debounce_n must be >= 1")
        self.debounce_n = debounce_n
        self.current_level: HydrationLevel | None = None
        self.candidate: HydrationLevel | None = None
        self.candidate_count = 0

    def advance(self, prediction: WindowPrediction) -> AlertEvent | None:
        level = prediction.level
        if level == self.current_level:
            self.candidate = None
            self.candidate_count = 0
            return None
        if level == self.candidate:
            self.candidate_count += 1
        else:
            self.candidate = level
            self.candidate_count = 1
        if self.candidate_count < self.debounce_n:
            return None
        previous = self.current_level
        self.current_level = level
        self.candidate = None
        self.candidate_count = 0
        if previous is None:
            return None  # silent startup
        return AlertEvent(
            time=prediction.time,
            from_level=previous,
            to_level=level,
            confidence=prediction.confidence,
            message=f"hydration level changed: {previous.name} -> {level.name}",
        )


@dataclass(frozen=True)
class StreamConfig:
    rate: float = 4.0
    context_s: float = 60.0
    debounce_n: int = 3
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    decompose: DecomposeConfig = field(default_factory=DecomposeConfig)
    params: BatemanParams = field(default_factory=BatemanParams)
    window: WindowSpec = field(default_factory=WindowSpec)


class StreamEngine:
    """Single-owner streaming inference engine.

    push_sample appends one (t, µS) sample, advancing the incremental
    filter; when a 5 s window boundary passes with a full context it runs
    decompose -> featurize -> predict and feeds the state machine.  Sinks
    receive every AlertEvent (and predictions, if they accept them).
    """

    def __init__(self, model: HydrationModel, config: StreamConfig | None = None,
                 sinks: list | None = None):
        self.config = config or StreamConfig()
        self.model = model
        self.machine = StateMachine(self.config.debounce_n)
        self.sinks = list(sinks or [])
        cfg = self.config
        self.window_samples = cfg.window.window_samples(cfg.rate)
        self.context_samples = int(round(cfg.context_s * cfg.rate))
        self.capacity = self.context_samples + SMOOTH_MARGIN
        self._filter = StreamingLowpass(cfg.rate, cfg.preprocess.cutoff_hz,
                                        cfg.preprocess.filter_order)
        self._buffer = np.empty(self.capacity)
        self._buffered = 0          # valid samples in the ring tail
        self._count = 0             # total samples accepted
        self._start_time: float | None = None
        self._last_time: float | None = None
        self._last_value: float | None = None
        self.artifact_spans: list[ArtifactSpan] = []
        self.predictions: list[WindowPrediction] = []
        self.alerts: list[AlertEvent] = []

    # -- ingestion -----------------------------------------------------------

    def push_sample(self, t: float, value: float) -> WindowPrediction | None:
        cfg = self.config
        dt = 1.0 / cfg.rate
        if self._last_time is not None and t < self._last_time - 1e-9:
            raise TimestampRegression(
                f"timestamp {t} precedes previous sample {self._last_time}")
        if self._start_time is None:
            self._start_time = t
            return self._accept(float(value))
        steps = int(round((t - self._last_time) / dt))
        if steps <= 0:
            return None  # duplicate timestamp, ignore
        prediction = None
        if steps > 2:
            # gap: bridge with linear interpolation and record the span
            self.artifact_spans.append(
                ArtifactSpan(self._last_time, t, "device_off"))
        for i in range(1, steps):
            filler = self._last_value + (value - self._last_value) * i / steps
            prediction = self._accept(float(filler)) or prediction
        prediction = self._accept(float(value)) or prediction
        self._last_time = self._last_time + steps * dt
        return prediction

    def _accept(self, value: float) -> WindowPrediction | None:
        filtered = float(self._filter.push(np.array([value]))[0])
        if self._buffered < self.capacity:
            self._buffer[self._buffered] = filtered
            self._buffered += 1
        else:
            self._buffer[:-1] = self._buffer[1:]
            self._buffer[-1] = filtered
        self._count += 1
        self._last_value = value
        if self._last_time is None:
            self._last_time = self._start_time
        if self._count % self.window_samples == 0 \
                and self._count >= self.context_samples:
            return self._infer()
        return None

    # -- inference -----------------------------------------------------------

    def _infer(self) -> WindowPrediction:
        cfg = self.config
        rate = cfg.rate
        buf = self._buffer[:self._buffered]
        smoothed = smooth_array(buf, cfg.preprocess.hanning_width)
        context = smoothed[-self.context_samples:] \
            if len(smoothed) > self.context_samples else smoothed
        end_time = self._start_time + (self._count - 1) / rate + 1.0 / rate
        context_start = end_time - len(context) / rate
        series = SampleSeries(context_start, rate, context)
        decomp = cda(series, cfg.params, cfg.decompose)
        ddecomp = dda(series, cfg.params, cfg.decompose)
        window_start = end_time - cfg.window.activity_window
        spans = sub_window_spans((window_start, end_time), rate, cfg.window)
        sub_rows = [base_features(decomp, ddecomp, span) for span in spans]
        vector = aggregate(sub_rows, window_start=window_start, session="live")
        level, confidence = predict(self.model, vector)
        prediction = WindowPrediction(time=end_time, window_start=window_start,
                                      level=level, confidence=confidence)
        self.predictions.append(prediction)
        self._emit(prediction)
        alert = self.machine.advance(prediction)
        if alert is not None:
            self.alerts.append(alert)
            self._emit(alert)
        return prediction


    def _emit(self, event):
        for sink in self.sinks:
            sink(event)


@dataclass(frozen=True)
class ReplaySummary:
    predictions: tuple
    alerts: tuple
    artifact_spans: tuple


def replay(recording: SessionRecording, model: HydrationModel,
           config: StreamConfig | None = None, *, speed: float = float("inf"),
           sinks: list | None = None) -> ReplaySummary:
    """Feed a recording through a fresh engine at speed x real time.

    speed=inf streams as fast as possible with identical results; pacing
    only affects wall-clock timing, never the outputs.
    """
    config = config or StreamConfig(rate=recording.series.rate)
    engine = StreamEngine(model, config, sinks=sinks)
    series = recording.series
    dt = 1.0 / series.rate
    pause = 0.0 if np.isinf(speed) else dt / speed
    for i, value in enumerate(series.values):
        engine.push_sample(series.start_time + i * dt, float(value))
        if pause:
            time.sleep(pause)
    return ReplaySummary(predictions=tuple(engine.predictions),
                         alerts=tuple(engine.alerts),
                         artifact_spans=tuple(engine.artifact_spans))


def batch_predict(recording: SessionRecording, model: HydrationModel,
                  config: StreamConfig | None = None) -> list[WindowPrediction]:
    """Offline reference for the stream path: same per-boundary computation
    from plain array slicing, no engine state."""
    from .preprocess import butterworth_lowpass

    config = config or StreamConfig(rate=recording.series.rate)
    series = recording.series
    cfg = config
    rate = series.rate
    w = cfg.window.window_samples(rate)
    context_samples = int(round(cfg.context_s * rate))
    capacity = context_samples + SMOOTH_MARGIN
    filtered = butterworth_lowpass(series, cfg.preprocess.cutoff_hz,
                                   cfg.preprocess.filter_order).values
    out = []
    for end in range(w, len(series) + 1, w):
        if end < context_samples:
            continue
        buf = filtered[max(0, end - capacity):end]
        smoothed = smooth_array(buf, cfg.preprocess.hanning_width)
        context = smoothed[-context_samples:] \
            if len(smoothed) > context_samples else smoothed
        end_time = series.start_time + end / rate
        ctx_series = SampleSeries(end_time - len(context) / rate, rate, context)
        decomp = cda(ctx_series, cfg.params, cfg.decompose)
        ddecomp = dda(ctx_series, cfg.params, cfg.decompose)
        window_start = end_time - cfg.window.activity_window
        spans = sub_window_spans((window_start, end_time), rate, cfg.window)
        sub_rows = [base_features(decomp, ddecomp, span) for span in spans]
        vector = aggregate(sub_rows, window_start=window_start, session="live")
        level, confidence = predict(model, vector)
        out.append(WindowPrediction(time=end_time, window_start=window_start,
                                    level=level, confidence=confidence))
    return out


# --- alert sinks ------------------------------------------------------------

class StdoutSink:
    """JSON line per event on a stream (stdout by default)."""

    def __init__(self, stream=None):
        import sys
        self.stream = stream if stream is not None else sys.stdout

    def __call__(self, event):
        self.stream.write(json.dumps(event.to_json()) + "\n")
        self.stream.flush()


class InProcessSink:
    """Thread-safe queue of events, consumed by the service's live feed."""

    def __init__(self):
        self.events: "queue.Queue" = queue.Queue()

    def __call__(self, event):
        self.events.put(event)

    def drain(self) -> list:
        out = []
        while True:
            try:
                out.append(self.events.get_nowait())
            except queue.Empty:
                return out


class WebhookSink:
    """POSTs alert events to a URL from a background thread.

    The engine thread only enqueues, so slow endpoints never block
    inference; predictions are not forwarded.
    """

    def __init__(self, url: str):
        import httpx

        self.url = url
        self._client = httpx.Client(timeout=5.0)
        self._queue: "queue.Queue" = queue.Queue()
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def __call__(self, event):
        if isinstance(event, AlertEvent):
            self._queue.put(event)

    def _run(self):
        while True:
            event = self._queue.get()
            if event is None:
                return
            try:
                self._client.post(self.url, json=event.to_json())
            except Exception:
                pass  # alert delivery is best-effort

    def close(self):
        self._queue.put(None)
        self._worker.join(timeout=5.0)
        self._client.close()
