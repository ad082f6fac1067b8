"""Cleaning chain: artifact correction, causal low-pass filter, Hanning smoothing.

The filter is forward-only so the identical code path serves both batch
processing and the real-time engine; a stateful variant carries the IIR
state across pushes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import (
    CutoffAboveNyquist,
    SpanCoversWholeSeries,
    UnsupportedOrder,
    WidthTooLarge,
)
from .signal_core import ArtifactSpan, SampleSeries, SessionRecording, merge_spans


@dataclass(frozen=True)
class PreprocessConfig:
    cutoff_hz: float = 1.0
    filter_order: int = 1
    hanning_width: int = 4
    artifact_method: str = "linear"

    def __post_init__(self):
        if self.cutoff_hz <= 0:
            raise ValueError("cutoff_hz must be positive")
        if self.filter_order < 1:
            raise ValueError("filter_order must be >= 1")
        if self.hanning_width < 2:
            raise ValueError("hanning_width must be >= 2")
        if self.artifact_method not in ("linear", "spline_like"):
            raise ValueError(f"unknown artifact_method {self.artifact_method!r}")


def butter_coeffs(rate: float, cutoff_hz: float, order: int):
    if order not in (1, 2):
        raise UnsupportedOrder(f"order {order} not supported (use 1 or 2)")
    nyquist = rate / 2.0
    if cutoff_hz >= nyquist:
        raise CutoffAboveNyquist(f"cutoff {cutoff_hz} Hz >= Nyquist {nyquist} Hz")
    b, a = sps.butter(order, cutoff_hz / nyquist, btype="low")
    return b, a


def butterworth_lowpass(series: SampleSeries, cutoff_hz: float, order: int = 1) -> SampleSeries:
    """Causal (forward-only) Butterworth low-pass; unit DC gain by design.

    Filter state starts at steady state for the first sample value, so a
    constant signal passes through unchanged (no startup transient).
    """
    b, a = butter_coeffs(series.rate, cutoff_hz, order)
    if len(series) == 0:
        return series
    zi = sps.lfilter_zi(b, a) * series.values[0]
    out, _ = sps.lfilter(b, a, series.values, zi=zi)
    return series.with_values(out)


class StreamingLowpass:
    """Single-owner incremental variant of butterworth_lowpass.

    Feeding samples chunk by chunk produces bit-identical output to
    filtering the concatenated signal in one call.
    """

    def __init__(self, rate: float, cutoff_hz: float, order: int = 1):
        self.b, self.a = butter_coeffs(rate, cutoff_hz, order)
        self.zi = None  # steady-state init from the first pushed sample

    def push(self, values: np.ndarray) -> np.ndarray:
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if len(values) == 0:
            return values
        if self.zi is None:
            self.zi = sps.lfilter_zi(self.b, self.a) * values[0]
        out, self.zi = sps.lfilter(self.b, self.a, values, zi=self.zi)
        return out


def hanning_weights(width: int) -> np.ndarray:
    """Normalized raised-cosine weights over a support of width+1 points.

    The zero endpoints of the raised cosine carry no weight, so the cosine
    is evaluated over width+3 points and the zero ends dropped; weights are
    renormalized to sum 1 so constants pass through unchanged.
    """
    if width < 2:
        raise ValueError("width must be >= 2")
    w = np.hanning(width + 3)[1:-1]
    return w / w.sum()


def hanning_smooth(series: SampleSeries, width: int = 4) -> SampleSeries:
    """Centered weighted average; edges use renormalized truncated windows."""
    n = len(series)
    if width > n:
        raise WidthTooLarge(f"width {width} exceeds series length {n}")
    out = smooth_array(series.values, width)
    return series.with_values(out)


def smooth_array(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    n = len(values)
    w = hanning_weights(width)
    half = (len(w) - 1) // 2
    num = np.zeros(n)
    den = np.zeros(n)
    for j, wj in enumerate(w):
        off = j - half  # even-length supports lean one sample toward the future
        dst_lo = max(0, -off)
        dst_hi = min(n, n - off)
        if dst_lo >= dst_hi:
            continue
        num[dst_lo:dst_hi] += wj * values[dst_lo + off:dst_hi + off]
        den[dst_lo:dst_hi] += wj
    return num / den


def correct_artifacts(series: SampleSeries, spans: list[ArtifactSpan],
                      method: str = "linear") -> SampleSeries:
    """Replace samples inside each span by interpolation between clean anchors."""
    if not spans:
        return series
    spans = merge_spans(spans)
    values = series.values.copy()
    n = len(values)
    mask = np.zeros(n, dtype=bool)
    for s in spans:
        i0 = max(0, int(np.ceil((s.t_start - series.start_time) * series.rate - 1e-9)))
        i1 = min(n - 1, int(np.floor((s.t_end - series.start_time) * series.rate + 1e-9)))
        if i0 <= i1:
            mask[i0:i1 + 1] = True
    if mask.all():
        raise SpanCoversWholeSeries("no clean anchor samples remain")
    idx = np.arange(n)
    values[mask] = np.interp(idx[mask], idx[~mask], values[~mask])
    return series.with_values(values)


def preprocess_pipeline(recording: SessionRecording,
                        config: PreprocessConfig | None = None) -> SampleSeries:
    """correct_artifacts -> butterworth_lowpass -> hanning_smooth."""
    config = config or PreprocessConfig()
    series = correct_artifacts(recording.series, list(recording.artifact_spans),
                               config.artifact_method)
    series = butterworth_lowpass(series, config.cutoff_hz, config.filter_order)
    series = hanning_smooth(series, config.hanning_width)
    return series
