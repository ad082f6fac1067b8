"""Core domain types: sample series, recordings, artifact spans, annotations.

All types are immutable value objects; derived series are built by
constructing new instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .errors import (
    EmptyBody,
    EmptySeries,
    InvalidAnnotation,
    MalformedHeader,
    NonNumericSample,
    OutOfRange,
)

ANNOTATION_SCHEMA_VERSION = 1


class HydrationLevel(IntEnum):
    """Four-class hydration label; higher value = more dehydrated."""

    WELL_HYDRATED = 0
    HYDRATED = 1
    DEHYDRATED = 2
    VERY_DEHYDRATED = 3


ARTIFACT_REASONS = ("movement", "device_off", "other")


@dataclass(frozen=True)
class SampleSeries:
    """Uniformly sampled skin-conductance series (microsiemens)."""

    start_time: float
    rate: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if vals.size and not np.all(np.isfinite(vals)):
            raise ValueError("sample values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_time(self) -> float:
        """Time of the last sample."""
        return self.start_time + (len(self.values) - 1) / self.rate

    @property
    def duration(self) -> float:
        return (len(self.values) - 1) / self.rate if len(self.values) else 0.0

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.values)) / self.rate

    def time_of(self, i: int) -> float:
        return self.start_time + i / self.rate

    def index_at(self, t: float) -> int:
        """Index of the sample nearest to time t."""
        return int(round((t - self.start_time) * self.rate))

    def with_values(self, values: np.ndarray) -> "SampleSeries":
        return SampleSeries(self.start_time, self.rate, np.asarray(values, dtype=float))


@dataclass(frozen=True)
class ArtifactSpan:
    t_start: float
    t_end: float
    reason: str = "movement"

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("artifact span requires t_end > t_start")
        if self.reason not in ARTIFACT_REASONS:
            raise ValueError(f"unknown artifact reason {self.reason!r}")

    def overlaps(self, t0: float, t1: float) -> bool:
        return self.t_start < t1 and t0 < self.t_end


def merge_spans(spans: list[ArtifactSpan]) -> list[ArtifactSpan]:
    """Sort spans and merge any that overlap or touch."""
    if not spans:
        return []
    ordered = sorted(spans, key=lambda s: s.t_start)
    merged = [ordered[0]]
    for s in ordered[1:]:
        last = merged[-1]
        if s.t_start <= last.t_end:
            if s.t_end > last.t_end:
                merged[-1] = ArtifactSpan(last.t_start, s.t_end, last.reason)
        else:
            merged.append(s)
    return merged


@dataclass(frozen=True)
class AnnotationTrack:
    """Piecewise-constant hydration label, right-continuous at transitions."""

    initial_level: HydrationLevel
    transitions: tuple = ()

    def __post_init__(self):
        trans = tuple((float(t), HydrationLevel(lv)) for t, lv in self.transitions)
        object.__setattr__(self, "transitions", trans)
        prev_t = None
        prev_lv = self.initial_level
        for t, lv in trans:
            if prev_t is not None and t <= prev_t:
                raise InvalidAnnotation("transition times must be strictly increasing")
            if lv == prev_lv:
                raise InvalidAnnotation("consecutive transitions must change the level")
            prev_t, prev_lv = t, lv

    @property
    def is_empty(self) -> bool:
        return False  # an initial level always defines labels everywhere


def level_at(track: AnnotationTrack, t: float, *, t_min: float | None = None,
             t_max: float | None = None) -> HydrationLevel:
    """Label in effect at time t (inclusive at transition times)."""
    if t_min is not None and t < t_min:
        raise OutOfRange(f"t={t} before session start {t_min}")
    if t_max is not None and t > t_max:
        raise OutOfRange(f"t={t} after session end {t_max}")
    level = track.initial_level
    for tt, lv in track.transitions:
        if tt <= t:
            level = lv
        else:
            break
    return level


@dataclass(frozen=True)
class SessionRecording:
    id: str
    subject: str
    series: SampleSeries
    artifact_spans: tuple = ()
    annotations: AnnotationTrack | None = None

    def __post_init__(self):
        spans = merge_spans(list(self.artifact_spans))
        t0, t1 = self.series.start_time, self.series.end_time
        for s in spans:
            if s.t_start < t0 - 1e-9 or s.t_end > t1 + 1e-9:
                raise ValueError("artifact span outside series span")
        object.__setattr__(self, "artifact_spans", tuple(spans))

    def with_annotations(self, track: AnnotationTrack) -> "SessionRecording":
        return replace(self, annotations=track)


# --- E4-style CSV ingestion -------------------------------------------------

def parse_e4_csv(text: str) -> SampleSeries:
    """Parse the wristband export format.

    Line 1 is the UTC start timestamp, line 2 the sample rate in Hz, every
    following non-empty line one conductance value.
    """
    lines = text.replace("\r\n", "\n").split("\n")
    lines = [ln.strip() for ln in lines]
    while lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 2:
        raise MalformedHeader("expected two header lines")
    try:
        start_time = float(lines[0])
        rate = float(lines[1])
    except ValueError:
        raise MalformedHeader(f"non-numeric header: {lines[0]!r} / {lines[1]!r}")
    if rate <= 0:
        raise MalformedHeader(f"non-positive rate {rate}")
    body = lines[2:]
    if not body:
        raise EmptyBody("no samples after header")
    values = np.empty(len(body))
    for i, ln in enumerate(body):
        try:
            values[i] = float(ln)
        except ValueError:
            raise NonNumericSample(i + 2, ln)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NonNumericSample(bad + 2, body[bad])
    return SampleSeries(start_time, rate, values)


def serialize_e4_csv(series: SampleSeries) -> str:
    lines = [repr(series.start_time), repr(series.rate)]
    lines.extend(repr(float(v)) for v in series.values)
    return "\n".join(lines) + "\n"


def resample(series: SampleSeries, target_rate: float) -> SampleSeries:
    """Linear interpolation onto a new uniform grid spanning the same range."""
    if len(series) == 0:
        raise EmptySeries("cannot resample an empty series")
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == series.rate:
        return series
    duration = series.duration
    n_out = int(np.floor(duration * target_rate)) + 1
    t_new = np.arange(n_out) / target_rate
    t_old = np.arange(len(series)) / series.rate
    vals = np.interp(t_new, t_old, series.values)
    return SampleSeries(series.start_time, target_rate, vals)


# --- annotation document (JSON, schema v1) ----------------------------------

def annotations_to_json(track: AnnotationTrack, spans: list[ArtifactSpan]) -> dict:
    return {
        "v": ANNOTATION_SCHEMA_VERSION,
        "initial_level": int(track.initial_level),
        "transitions": [{"t": t, "level": int(lv)} for t, lv in track.transitions],
        "artifacts": [
            {"t_start": s.t_start, "t_end": s.t_end, "reason": s.reason}
            for s in merge_spans(spans)
        ],
    }


def annotations_from_json(doc: dict) -> tuple[AnnotationTrack, list[ArtifactSpan]]:
    if not isinstance(doc, dict):
        raise InvalidAnnotation("annotation document must be an object")
    if doc.get("v") != ANNOTATION_SCHEMA_VERSION:
        raise InvalidAnnotation(f"unsupported schema version {doc.get('v')!r}")
    try:
        initial = HydrationLevel(int(doc["initial_level"]))
        transitions = [(float(e["t"]), HydrationLevel(int(e["level"])))
                       for e in doc.get("transitions", [])]
        spans = [ArtifactSpan(float(e["t_start"]), float(e["t_end"]),
                              str(e.get("reason", "other")))
                 for e in doc.get("artifacts", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidAnnotation(str(exc))
    track = AnnotationTrack(initial, tuple(transitions))
    return track, merge_spans(spans)


def load_annotations(text: str) -> tuple[AnnotationTrack, list[ArtifactSpan]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidAnnotation(f"invalid JSON: {exc}")
    return annotations_from_json(doc)
