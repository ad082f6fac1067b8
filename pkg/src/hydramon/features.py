"""Windowed feature extraction over the two decomposition routes.

Each 5 s activity window is tiled by a rolling 8-sample sub-window; twelve
base quantities (seven continuous-route, five discrete-route) are computed
per sub-window and summarized by population mean, variance, and standard
deviation, giving a fixed 36-column vector per window.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .decompose import (
    BatemanParams,
    DecomposeConfig,
    Decomposition,
    DiscreteDecomposition,
    cda,
    dda,
)
from .errors import (
    NoLabeledWindows,
    SeriesTooShort,
    TooFewSubWindows,
    WindowOutOfRange,
)
from .signal_core import HydrationLevel, SampleSeries, SessionRecording, level_at

BASE_FEATURE_NAMES = (
    "cda_nscr",
    "cda_latency",
    "cda_ampsum",
    "cda_iscr",
    "cda_phasic_mean",
    "cda_phasic_max",
    "cda_tonic_mean",
    "dda_nscr",
    "dda_latency",
    "dda_ampsum",
    "dda_areasum",
    "dda_tonic_mean",
)

STAT_SUFFIXES = ("mean", "var", "std")

# fixed 36-column layout: (mean, var, std) triplet per base feature
FEATURE_COLUMNS = tuple(
    f"{base}_{stat}" for base in BASE_FEATURE_NAMES for stat in STAT_SUFFIXES
)


def feature_order_hash(columns=FEATURE_COLUMNS) -> str:
    """Stable digest of the column layout, used as a train/serve skew guard."""
    return hashlib.sha256(",".join(columns).encode()).hexdigest()


@dataclass(frozen=True)
class WindowSpec:
    activity_window: float = 5.0   # seconds
    sub_window: int = 8            # samples
    sub_step: int = 1              # samples

    def __post_init__(self):
        if self.activity_window <= 0:
            raise ValueError("activity_window must be positive")
        if self.sub_window < 2:
            raise ValueError("sub_window must be >= 2 samples")
        if self.sub_step < 1:
            raise ValueError("sub_step must be >= 1")

    def window_samples(self, rate: float) -> int:
        n = int(round(self.activity_window * rate))
        if self.sub_window > n:
            raise ValueError("sub_window exceeds the activity window")
        return n


@dataclass(frozen=True)
class BaseFeatures:
    cda_nscr: float
    cda_latency: float
    cda_ampsum: float
    cda_iscr: float
    cda_phasic_mean: float
    cda_phasic_max: float
    cda_tonic_mean: float
    dda_nscr: float
    dda_latency: float
    dda_ampsum: float
    dda_areasum: float
    dda_tonic_mean: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in BASE_FEATURE_NAMES])


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray            # 36 floats, FEATURE_COLUMNS order
    window_start: float
    session: str
    label: HydrationLevel | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(FEATURE_COLUMNS),):
            raise ValueError(f"expected {len(FEATURE_COLUMNS)} features, got {vals.shape}")


@dataclass(frozen=True)
class Dataset:
    rows: tuple
    columns: tuple = FEATURE_COLUMNS

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    def class_counts(self) -> dict:
        counts = {level: 0 for level in HydrationLevel}
        for row in self.rows:
            if row.label is not None:
                counts[row.label] += 1
        return counts

    def matrix(self) -> np.ndarray:
        return np.stack([row.values for row in self.rows]) if self.rows else \
            np.empty((0, len(self.columns)))

    def labels(self) -> np.ndarray:
        return np.array([int(row.label) for row in self.rows])


def window_segments(series: SampleSeries, spec: WindowSpec | None = None
                    ) -> list[tuple[float, float]]:
    """Non-overlapping consecutive activity windows; trailing partial dropped."""
    spec = spec or WindowSpec()
    n_win = spec.window_samples(series.rate)
    if len(series) < n_win:
        raise SeriesTooShort(
            f"series of {len(series)} samples cannot fit a {n_win}-sample window")
    count = len(series) // n_win
    out = []
    for i in range(count):
        start = series.start_time + (i * n_win) / series.rate
        out.append((start, start + spec.activity_window))
    return out


def base_features(decomp: Decomposition, ddecomp: DiscreteDecomposition,
                  window: tuple[float, float]) -> BaseFeatures:
    """Twelve base quantities of one (sub-)window from session decompositions."""
    start, end = window
    series = decomp.phasic_driver
    rate = series.rate
    i0 = int(round((start - series.start_time) * rate))
    i1 = int(round((end - series.start_time) * rate))
    if i0 < 0 or i1 > len(series) or i0 >= i1:
        raise WindowOutOfRange(f"window [{start}, {end}) outside decomposition span")
    length = end - start

    c_onsets = [e for e in decomp.scrs if start <= e.onset < end]
    cda_nscr = float(len(c_onsets))
    cda_latency = (c_onsets[0].onset - start) if c_onsets else length
    cda_ampsum = float(sum(e.amplitude for e in c_onsets))
    driver_seg = series.values[i0:i1]
    cda_iscr = float(driver_seg.sum()) / rate
    cda_phasic_mean = cda_iscr / length
    cda_phasic_max = float(driver_seg.max())
    cda_tonic_mean = float(decomp.tonic.values[i0:i1].mean())

    d_onsets = [e for e in ddecomp.impulses if start <= e.onset < end]
    dda_nscr = float(len(d_onsets))
    dda_latency = (d_onsets[0].onset - start) if d_onsets else length
    dda_ampsum = float(sum(e.amplitude for e in d_onsets))
    dda_areasum = float(sum(e.area for e in d_onsets))
    dda_tonic_mean = float(ddecomp.tonic.values[i0:i1].mean())

    return BaseFeatures(
        cda_nscr=cda_nscr, cda_latency=cda_latency, cda_ampsum=cda_ampsum,
        cda_iscr=cda_iscr, cda_phasic_mean=cda_phasic_mean,
        cda_phasic_max=cda_phasic_max, cda_tonic_mean=cda_tonic_mean,
        dda_nscr=dda_nscr, dda_latency=dda_latency, dda_ampsum=dda_ampsum,
        dda_areasum=dda_areasum, dda_tonic_mean=dda_tonic_mean,
    )


def aggregate(sub_rows: list[BaseFeatures], *, window_start: float = 0.0,
              session: str = "", label: HydrationLevel | None = None
              ) -> FeatureVector:
    """Population mean/variance/std of each base feature over the sub-rows."""
    if len(sub_rows) < 2:
        raise TooFewSubWindows(f"need >= 2 sub-windows, got {len(sub_rows)}")
    data = np.stack([r.as_array() for r in sub_rows])
    mean = data.mean(axis=0)
    var = data.var(axis=0)          # population variance
    std = np.sqrt(var)
    values = np.empty(len(FEATURE_COLUMNS))
    values[0::3] = mean
    values[1::3] = var
    values[2::3] = std
    return FeatureVector(values=values, window_start=window_start,
                         session=session, label=label)


@dataclass(frozen=True)
class FeaturizeConfig:
    window: WindowSpec = field(default_factory=WindowSpec)
    decompose: DecomposeConfig = field(default_factory=DecomposeConfig)
    params: BatemanParams = field(default_factory=BatemanParams)


def sub_window_spans(window: tuple[float, float], rate: float, spec: WindowSpec
                     ) -> list[tuple[float, float]]:
    """Rolling sub-window spans (seconds) inside one activity window."""
    start, _ = window
    n_win = spec.window_samples(rate)
    spans = []
    for off in range(0, n_win - spec.sub_window + 1, spec.sub_step):
        s = start + off / rate
        spans.append((s, s + spec.sub_window / rate))
    return spans


def featurize_session(recording: SessionRecording,
                      config: FeaturizeConfig | None = None,
                      *, decomp: Decomposition | None = None,
                      ddecomp: DiscreteDecomposition | None = None) -> Dataset:
    """Labeled feature rows for every clean, annotated activity window.

    Both decompositions run once over the whole (already preprocessed)
    series; windows overlapping an artifact span are excluded.  Precomputed
    decompositions may be passed to skip the heavy step.
    """
    config = config or FeaturizeConfig()
    if recording.annotations is None:
        raise NoLabeledWindows("recording has no annotation track")
    series = recording.series
    if decomp is None:
        decomp = cda(series, config.params, config.decompose)
    if ddecomp is None:
        ddecomp = dda(series, config.params, config.decompose)
    rows = []
    for (start, end) in window_segments(series, config.window):
        if any(s.overlaps(start, end) for s in recording.artifact_spans):
            continue
        spans = sub_window_spans((start, end), series.rate, config.window)
        sub_rows = [base_features(decomp, ddecomp, span) for span in spans]
        label = level_at(recording.annotations, (start + end) / 2.0,
                         t_min=series.start_time, t_max=series.end_time)
        rows.append(aggregate(sub_rows, window_start=start,
                              session=recording.id, label=label))
    if not rows:
        raise NoLabeledWindows("no clean annotated windows in session")
    rows.sort(key=lambda r: (r.session, r.window_start))
    return Dataset(rows=tuple(rows))


def merge_datasets(datasets: list[Dataset]) -> Dataset:
    rows = [row for ds in datasets for row in ds.rows]
    rows.sort(key=lambda r: (r.session, r.window_start))
    return Dataset(rows=tuple(rows))


# --- CSV + manifest I/O -----------------------------------------------------

def dataset_to_csv(dataset: Dataset) -> str:
    """Header + one row per vector; repr floats so round trips are bit-exact."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(FEATURE_COLUMNS) + ["label", "session", "window_start"])
    for row in dataset.rows:
        label = "" if row.label is None else int(row.label)
        writer.writerow([repr(float(v)) for v in row.values]
                        + [label, row.session, repr(float(row.window_start))])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    expected = list(FEATURE_COLUMNS) + ["label", "session", "window_start"]
    if header != expected:
        raise ValueError("dataset CSV header does not match the documented layout")
    rows = []
    for rec in reader:
        if not rec:
            continue
        values = np.array([float(v) for v in rec[:len(FEATURE_COLUMNS)]])
        label_text = rec[len(FEATURE_COLUMNS)]
        label = None if label_text == "" else HydrationLevel(int(label_text))
        session = rec[len(FEATURE_COLUMNS) + 1]
        window_start = float(rec[len(FEATURE_COLUMNS) + 2])
        rows.append(FeatureVector(values=values, window_start=window_start,
                                  session=session, label=label))
    return Dataset(rows=tuple(rows))


def dataset_manifest(config: FeaturizeConfig) -> dict:
    """Config + layout digest stored next to every dataset CSV."""
    return {
        "v": 1,
        "feature_order_hash": feature_order_hash(),
        "columns": list(FEATURE_COLUMNS),
        "window": {
            "activity_window": config.window.activity_window,
            "sub_window": config.window.sub_window,
            "sub_step": config.window.sub_step,
        },
        "decompose": {
            "amp_threshold": config.decompose.amp_threshold,
            "onset_fraction": config.decompose.onset_fraction,
            "tonic_smooth_s": config.decompose.tonic_smooth_s,
            "driver_smooth_s": config.decompose.driver_smooth_s,
            "slew": config.decompose.slew,
            "mask_threshold": config.decompose.mask_threshold,
        },
        "tau": [config.params.tau_rise, config.params.tau_decay],
    }


def manifest_to_json(config: FeaturizeConfig) -> str:
    return json.dumps(dataset_manifest(config), indent=2) + "\n"
