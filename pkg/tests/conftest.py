"""Shared synthetic-signal generators used by the oracle and acceptance suites."""

from __future__ import annotations

import numpy as np
import pytest

from hydramon.decompose import BatemanParams, bateman_kernel, convolve_driver
from hydramon.features import FEATURE_COLUMNS, Dataset, FeatureVector
from hydramon.signal_core import (
    AnnotationTrack,
    HydrationLevel,
    SampleSeries,
    SessionRecording,
)

RATE = 4.0
PARAMS = BatemanParams(0.75, 2.0)

# Noise model for synthetic corpora: sigma = 0.005 uS, i.e. 20 dB below the
# smallest admissible SCR amplitude (0.05 uS), so every event clears the
# noise floor by the stated margin.
NOISE_SIGMA = 0.005


def make_kernel(rate: float = RATE):
    return bateman_kernel(PARAMS, rate)


def scr_recovery_signal(seed: int, duration_s: float = 600.0,
                        sigma: float = NOISE_SIGMA):
    """Slow tonic drift + 1..10 well-separated SCRs + Gaussian noise.

    Returns (series, onset_indices, amplitudes).  Inter-event gaps exceed
    3 * tau_decay as the recovery criterion requires.
    """
    kernel = make_kernel()
    rng = np.random.default_rng(seed)
    n = int(duration_s * RATE)
    t = np.arange(n) / RATE
    tonic = 1.0 + 0.05 * np.sin(2 * np.pi * t / duration_s) + 0.0001 * t
    n_scr = int(rng.integers(1, 11))
    min_gap = int(3 * PARAMS.tau_decay * RATE) + 2
    onsets: list[int] = []
    tries = 0
    while len(onsets) < n_scr and tries < 3000:
        c = int(rng.integers(60, n - 80))
        if all(abs(c - o) > min_gap for o in onsets):
            onsets.append(c)
        tries += 1
    onsets_arr = np.sort(np.array(onsets, dtype=int))
    amps = rng.uniform(0.05, 1.0, len(onsets_arr))
    driver = np.zeros(n)
    driver[onsets_arr] = amps / kernel.peak_gain
    clean = tonic + convolve_driver(driver, kernel)
    noisy = clean + rng.normal(0.0, sigma, n)
    return SampleSeries(0.0, RATE, noisy), onsets_arr, amps


def synthetic_feature_dataset(seed: int = 42, n_rows: int = 200,
                              class_means=(1.0, 1.5, 2.0, 2.5),
                              within_std: float = 0.1) -> Dataset:
    """Four-class dataset separated on the tonic-mean aggregate columns."""
    rng = np.random.default_rng(seed)
    tonic_cols = [i for i, c in enumerate(FEATURE_COLUMNS)
                  if c.endswith("tonic_mean_mean")]
    rows = []
    for i in range(n_rows):
        c = i % len(class_means)
        v = rng.normal(0.0, 0.02, len(FEATURE_COLUMNS))
        for tc in tonic_cols:
            v[tc] = rng.normal(class_means[c], within_std)
        rows.append(FeatureVector(values=v, window_start=float(i * 5),
                                  session="syn", label=HydrationLevel(c)))
    return Dataset(rows=tuple(rows))


def annotated_ramp_session(seed: int = 11, duration_s: float = 600.0
                           ) -> SessionRecording:
    """Session whose tonic ramps between four levels over 20 s, ending at
    each annotated transition; SCRs are kept clear of the ramps."""
    kernel = make_kernel()
    rng = np.random.default_rng(seed)
    n = int(duration_s * RATE)
    t = np.arange(n) / RATE
    transitions = ((150.0, HydrationLevel.HYDRATED),
                   (300.0, HydrationLevel.DEHYDRATED),
                   (450.0, HydrationLevel.VERY_DEHYDRATED))
    base = np.array([1.0, 1.5, 2.0, 2.5])
    tonic = np.full(n, base[0])
    for tt, level in transitions:
        ramp = np.clip((t - (tt - 20.0)) / 20.0, 0.0, 1.0)
        tonic += (base[int(level)] - base[int(level) - 1]) * ramp
    driver = np.zeros(n)
    for st in (50, 100, 200, 250, 350, 400, 500, 550):
        driver[int(st * RATE)] = 0.3 / kernel.peak_gain
    values = tonic + convolve_driver(driver, kernel) \
        + rng.normal(0.0, NOISE_SIGMA, n)
    track = AnnotationTrack(HydrationLevel.WELL_HYDRATED, transitions)
    return SessionRecording("ramp", "synthetic",
                            SampleSeries(0.0, RATE, values)
                            ).with_annotations(track)


def flat_session(seed: int, duration_s: float = 120.0,
                 tonic_level: float = 1.0) -> SessionRecording:
    """Artifact-free near-flat session for stream/batch comparisons."""
    kernel = make_kernel()
    rng = np.random.default_rng(seed)
    n = int(duration_s * RATE)
    t = np.arange(n) / RATE
    driver = np.zeros(n)
    for st in rng.uniform(30.0, duration_s - 20.0, 3):
        driver[int(st * RATE)] = rng.uniform(0.1, 0.5) / kernel.peak_gain
    values = tonic_level + 0.02 * np.sin(2 * np.pi * t / duration_s) \
        + convolve_driver(driver, kernel) + rng.normal(0.0, NOISE_SIGMA, n)
    return SessionRecording(f"flat{seed}", "synthetic",
                            SampleSeries(0.0, RATE, values))


@pytest.fixture()
def ramp_session() -> SessionRecording:
    return annotated_ramp_session()


@pytest.fixture()
def feature_dataset() -> Dataset:
    return synthetic_feature_dataset()
