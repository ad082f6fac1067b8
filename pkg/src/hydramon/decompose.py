"""Tonic/phasic decomposition of skin conductance.

Two routes over the same deconvolution core:

* continuous analysis: deconvolve by the canonical biexponential response
  shape, estimate a slow tonic driver from response-free stretches, and
  keep the continuous nonnegative phasic driver;
* discrete analysis: same deconvolution, but the tonic-removed driver is
  segmented into distinct nonnegative impulses, with any negative remainder
  moved to an overshoot series so the driver stays nonnegative.

All operations are pure; decomposing many windows in parallel is safe.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.optimize import minimize

from .errors import BoundsViolation, InvalidTaus, RateMismatch, SignalTooShort, ZeroLeadingTap
from .preprocess import smooth_array
from .signal_core import SampleSeries

KERNEL_DECAY_FRACTION = 1e-6

# Fraction of a candidate region's own driver peak at which the onset is
# placed.  The crossing phase is amplitude independent for a linear chain,
# so one constant serves responses of every size.
ONSET_REFINE_FRACTION = 0.3

TAU_RISE_BOUNDS = (0.1, 2.0)
TAU_DECAY_BOUNDS = (0.5, 10.0)


@dataclass(frozen=True)
class BatemanParams:
    """Time constants of the biexponential response shape."""

    tau_rise: float = 0.75
    tau_decay: float = 2.0

    def __post_init__(self):
        if not (0 < self.tau_rise < self.tau_decay):
            raise InvalidTaus(
                f"need 0 < tau_rise < tau_decay, got ({self.tau_rise}, {self.tau_decay})")

    def peak_time(self) -> float:
        """Closed-form maximizer of exp(-t/tau_d) - exp(-t/tau_r)."""
        r, d = self.tau_rise, self.tau_decay
        return r * d / (d - r) * math.log(d / r)


@dataclass(frozen=True)
class Kernel:
    rate: float
    taps: np.ndarray
    params: BatemanParams

    def __post_init__(self):
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=float))

    def __len__(self) -> int:
        return len(self.taps)

    @property
    def peak_gain(self) -> float:
        """Reconvolved peak amplitude of a unit driver impulse."""
        return float(self.taps.max()) / self.rate


def bateman_kernel(params: BatemanParams, rate: float, duration: float | None = None) -> Kernel:
    """Discretize the response shape at sample midpoints.

    Midpoint evaluation keeps the leading tap strictly positive (the shape
    itself is zero at t=0), which causal deconvolution requires. The taps
    are scaled to unit area (sum * dt = 1) so a constant driver convolves
    to the same constant. Duration is extended until the tail has decayed
    below 1e-6 of the peak.
    """
    r, d = params.tau_rise, params.tau_decay
    if duration is None:
        duration = 5.0 * d
    if duration < 5.0 * d:
        raise ValueError(f"duration must be >= 5*tau_decay ({5.0 * d}s)")
    b_max = math.exp(-params.peak_time() / d) - math.exp(-params.peak_time() / r)
    # tail is dominated by the decay exponential
    t_decay = d * math.log(1.0 / (KERNEL_DECAY_FRACTION * b_max))
    duration = max(duration, t_decay)
    n = int(math.ceil(duration * rate))
    t = (np.arange(n) + 0.5) / rate
    taps = np.exp(-t / d) - np.exp(-t / r)
    taps = np.maximum(taps, 0.0)
    taps *= rate / taps.sum()
    return Kernel(rate, taps, params)


def convolve_driver(driver: np.ndarray, kernel: Kernel, n: int | None = None) -> np.ndarray:
    """Zero-history causal convolution of a driver with the response shape."""
    out = np.convolve(driver, kernel.taps) / kernel.rate
    if n is None:
        n = len(driver)
    return out[:n]


def deconvolve(signal: SampleSeries, kernel: Kernel) -> SampleSeries:
    """Causal long-division deconvolution: returns d with conv(d) == signal.

    Realized as an IIR filter whose denominator is the kernel taps; the
    recursion is d[n] = (rate*s[n] - sum_{k>0} taps[k] d[n-k]) / taps[0].
    """
    if abs(signal.rate - kernel.rate) > 1e-9:
        raise RateMismatch(f"signal rate {signal.rate} != kernel rate {kernel.rate}")
    if kernel.taps[0] <= 0:
        raise ZeroLeadingTap("kernel leading tap must be positive")
    driver = sps.lfilter([kernel.rate], kernel.taps, signal.values)
    return signal.with_values(driver)


@dataclass(frozen=True)
class SCREvent:
    onset: float
    peak_time: float
    amplitude: float
    area: float


@dataclass(frozen=True)
class DecomposeConfig:
    amp_threshold: float = 0.01       # minimum reconvolved SCR amplitude, uS
    onset_fraction: float = 0.1
    tonic_smooth_s: float = 10.0      # raised-cosine width for the tonic driver
    driver_smooth_s: float = 0.5      # light smoothing of the raw driver
    slew: float = 0.05                # max tonic step per sample, uS
    mask_threshold: float | None = None  # response-masking amplitude, uS; None = amp_threshold/2
    min_duration_s: float = 30.0
    sparsity_weight: float = 0.0      # reserved config hook; no penalty applied
    beta: float = 0.1                 # roughness weight in the tau objective
    max_tau_evals: int = 200


@dataclass(frozen=True)
class Decomposition:
    tonic: SampleSeries
    phasic_driver: SampleSeries
    phasic: SampleSeries
    scrs: tuple
    params: BatemanParams
    residual_rms: float
    tonic_fallback: bool = False


@dataclass(frozen=True)
class DiscreteDecomposition:
    impulses: tuple
    overshoot: SampleSeries
    tonic: SampleSeries
    params: BatemanParams
    driver: SampleSeries = None
    tonic_fallback: bool = False


def estimate_tonic_driver(driver: np.ndarray, kernel: Kernel, config: DecomposeConfig
                          ) -> tuple[np.ndarray, bool]:
    """Slow baseline of the driver from response-free stretches.

    Peaks with reconvolved amplitude above the threshold are masked out to
    +/- 3 decay constants.  Each response-free stretch is reduced to anchor
    points (segment means, so single-sample noise cannot tilt the bridge),
    the anchors joined by linear interpolation, and the result smoothed with
    a wide raised cosine.  If every sample is masked the 5th percentile of
    the driver is used as a constant fallback (flagged).
    """
    n = len(driver)
    rate = kernel.rate
    mask_amp = config.mask_threshold
    if mask_amp is None:
        mask_amp = 0.5 * config.amp_threshold
    peak_height = mask_amp / kernel.peak_gain
    # responses ride on the slow driver baseline; detect peaks on the
    # detrended driver so baseline wiggles are not masked away
    base_width = min(n, max(2, int(round(config.tonic_smooth_s * rate))))
    detrended = driver - smooth_array(driver, base_width)
    interior = detrended[1:-1]
    is_peak = (interior > detrended[:-2]) & (interior >= detrended[2:]) & (interior >= peak_height)
    peaks = np.flatnonzero(is_peak) + 1
    mask = np.zeros(n, dtype=bool)
    halo = int(round(3.0 * kernel.params.tau_decay * rate))
    for p in peaks:
        mask[max(0, p - halo):min(n, p + halo + 1)] = True
    if mask.all():
        tonic = np.full(n, np.percentile(driver, 5.0))
        fallback = True
    else:
        anchor_pos = []
        anchor_val = []
        chunk = base_width
        i = 0
        while i < n:
            if mask[i]:
                i += 1
                continue
            j = i
            while j < n and not mask[j]:
                j += 1
            # split the run evenly so no anchor is a tiny remainder segment
            pieces = max(1, int(round((j - i) / chunk)))
            bounds = np.linspace(i, j, pieces + 1).round().astype(int)
            for a, b in zip(bounds[:-1], bounds[1:]):
                anchor_pos.append((a + b - 1) / 2.0)
                anchor_val.append(driver[a:b].mean())
            i = j
        tonic = np.interp(np.arange(n), anchor_pos, anchor_val)
        fallback = False
    width = max(2, int(round(config.tonic_smooth_s * rate)))
    width = min(width, n)
    if width >= 2:
        tonic = smooth_array(tonic, width)
    return tonic, fallback


def estimate_tonic(driver: SampleSeries, kernel: Kernel,
                   config: DecomposeConfig | None = None) -> SampleSeries:
    """Series wrapper around estimate_tonic_driver (tonic in driver units)."""
    config = config or DecomposeConfig()
    tonic, _ = estimate_tonic_driver(driver.values, kernel, config)
    return driver.with_values(tonic)


def detect_scrs(phasic_driver: SampleSeries, kernel: Kernel,
                amp_threshold: float = 0.01, onset_fraction: float = 0.1,
                tail_margin_s: float = 3.0) -> list[SCREvent]:
    """Segment the nonnegative driver into discrete response events.

    A connected region of driver above onset_fraction * threshold marks a
    candidate; its onset is the floor crossing. For amplitude and area the
    region is extended by a short tail margin on both sides (without
    crossing into a neighboring region) so mass just under the floor is not
    lost, then reconvolved in isolation; events whose reconvolved amplitude
    falls short of the threshold are dropped.
    """
    d = phasic_driver.values
    n = len(d)
    if n == 0:
        return []
    g = kernel.peak_gain
    region_floor = onset_fraction * amp_threshold / g
    above = d > region_floor
    # core regions
    cores: list[tuple[int, int]] = []
    i = 0
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j < n and above[j]:
            j += 1
        cores.append((i, j))
        i = j
    margin = int(round(tail_margin_s * phasic_driver.rate))
    events: list[SCREvent] = []
    for idx, (i, j) in enumerate(cores):
        lo = max(0, i - margin)
        hi = min(n, j + margin)
        if idx > 0:
            lo = max(lo, cores[idx - 1][1])
        if idx + 1 < len(cores):
            hi = min(hi, cores[idx + 1][0])
        region = d[lo:hi]
        response = convolve_driver(region, kernel, n=len(region) + len(kernel))
        amplitude = float(response.max())
        if amplitude >= amp_threshold:
            peak_idx = i + int(np.argmax(d[i:j]))
            # onset refined relative to the region's own peak so that small
            # and large responses cross at the same phase of the rise
            rel_floor = ONSET_REFINE_FRACTION * d[peak_idx]
            onset_idx = i
            while onset_idx < peak_idx and d[onset_idx] < rel_floor:
                onset_idx += 1
            events.append(SCREvent(
                onset=phasic_driver.time_of(onset_idx),
                peak_time=phasic_driver.time_of(peak_idx),
                amplitude=amplitude,
                area=float(region.sum()) / phasic_driver.rate,
            ))
    return events


def _slew_limit(values: np.ndarray, slew: float) -> np.ndarray:
    """Clamp per-sample steps to +/- slew (no-op for already-slow series)."""
    diffs = np.diff(values)
    if len(diffs) == 0 or np.all(np.abs(diffs) <= slew):
        return values
    out = np.empty_like(values)
    out[0] = values[0]
    for i in range(1, len(values)):
        step = np.clip(values[i] - out[i - 1], -slew, slew)
        out[i] = out[i - 1] + step
    return out


def _padded_driver(signal: SampleSeries, kernel: Kernel, config: DecomposeConfig
                   ) -> tuple[np.ndarray, int]:
    """Deconvolve with a left extension of the first sample value.

    The extension absorbs the zero-history startup transient so the visible
    driver starts at its steady value.
    """
    pad = len(kernel)
    padded = np.concatenate([np.full(pad, signal.values[0]), signal.values])
    # steady-state init for a constant history equal to the first sample, so
    # the inverse filter carries no startup transient at all
    zi = sps.lfilter_zi([kernel.rate], kernel.taps) * signal.values[0]
    driver, _ = sps.lfilter([kernel.rate], kernel.taps, padded, zi=zi)
    width = max(0, int(round(config.driver_smooth_s * signal.rate)))
    if width >= 2:
        driver = smooth_array(driver, width)
    return driver, pad


def _check_length(signal: SampleSeries, config: DecomposeConfig):
    if signal.duration < config.min_duration_s:
        raise SignalTooShort(
            f"need >= {config.min_duration_s}s of signal, got {signal.duration:.1f}s")


def cda(signal: SampleSeries, params: BatemanParams | None = None,
        config: DecomposeConfig | None = None) -> Decomposition:
    """Continuous decomposition into tonic and nonnegative phasic driver."""
    params = params or BatemanParams()
    config = config or DecomposeConfig()
    _check_length(signal, config)
    kernel = bateman_kernel(params, signal.rate)
    driver, pad = _padded_driver(signal, kernel, config)
    tonic_driver, fallback = estimate_tonic_driver(driver, kernel, config)
    phasic_driver_padded = np.maximum(driver - tonic_driver, 0.0)
    n = len(signal)
    tonic_vals = convolve_driver(tonic_driver, kernel, n=pad + n)[pad:]
    tonic_vals = _slew_limit(tonic_vals, config.slew)
    phasic_vals = convolve_driver(phasic_driver_padded, kernel, n=pad + n)[pad:]
    tonic = signal.with_values(tonic_vals)
    phasic = signal.with_values(phasic_vals)
    phasic_driver = signal.with_values(phasic_driver_padded[pad:])
    scrs = detect_scrs(phasic_driver, kernel, config.amp_threshold, config.onset_fraction)
    residual = signal.values - tonic_vals - phasic_vals
    residual_rms = float(np.sqrt(np.mean(residual ** 2)))
    return Decomposition(tonic=tonic, phasic_driver=phasic_driver, phasic=phasic,
                         scrs=tuple(scrs), params=params, residual_rms=residual_rms,
                         tonic_fallback=fallback)


def dda(signal: SampleSeries, params: BatemanParams | None = None,
        config: DecomposeConfig | None = None) -> DiscreteDecomposition:
    """Discrete decomposition: nonnegative impulses plus overshoot remainder."""
    params = params or BatemanParams()
    config = config or DecomposeConfig()
    _check_length(signal, config)
    kernel = bateman_kernel(params, signal.rate)
    driver, pad = _padded_driver(signal, kernel, config)
    tonic_driver, fallback = estimate_tonic_driver(driver, kernel, config)
    removed = driver - tonic_driver
    nonneg = np.maximum(removed, 0.0)
    overshoot_padded = np.maximum(-removed, 0.0)
    n = len(signal)
    tonic_vals = convolve_driver(tonic_driver, kernel, n=pad + n)[pad:]
    tonic_vals = _slew_limit(tonic_vals, config.slew)
    driver_series = signal.with_values(nonneg[pad:])
    impulses = detect_scrs(driver_series, kernel, config.amp_threshold, config.onset_fraction)
    return DiscreteDecomposition(
        impulses=tuple(impulses),
        overshoot=signal.with_values(overshoot_padded[pad:]),
        tonic=signal.with_values(tonic_vals),
        params=params,
        driver=driver_series,
        tonic_fallback=fallback,
    )


def tau_objective(signal: SampleSeries, params: BatemanParams,
                  config: DecomposeConfig | None = None) -> float:
    """Negativity of the tonic-removed driver plus temporal diffuseness.

    Too-slow time constants make the driver undershoot (negativity); too-fast
    ones smear impulses into wide humps, which the participation-ratio term
    (fraction of effectively active samples) penalizes. The objective is
    evaluated on the unsmoothed driver so impulse sharpness is visible.
    """
    config = config or DecomposeConfig()
    sharp = dataclasses.replace(config, driver_smooth_s=0.0)
    kernel = bateman_kernel(params, signal.rate)
    driver, pad = _padded_driver(signal, kernel, sharp)
    tonic_driver, fallback = estimate_tonic_driver(driver, kernel, sharp)
    if fallback:
        # a degenerate constant tonic trivially avoids negativity; reject
        return 1e3
    removed = (driver - tonic_driver)[pad:]
    neg = np.minimum(removed, 0.0)
    neg_rms = float(np.sqrt(np.mean(neg ** 2)))
    mag = np.abs(removed)
    sq = float((mag ** 2).sum())
    diffuseness = float(mag.sum() ** 2) / (len(mag) * sq) if sq > 0 else 0.0
    return neg_rms + config.beta * diffuseness


def optimize_tau(signal: SampleSeries, init: BatemanParams | None = None,
                 config: DecomposeConfig | None = None) -> BatemanParams:
    """Derivative-free simplex fit of the response-shape time constants.

    The returned parameters never score worse than the initial ones; out of
    bounds proposals are rejected with a large penalty.
    """
    init = init or BatemanParams()
    config = config or DecomposeConfig()
    lo_r, hi_r = TAU_RISE_BOUNDS
    lo_d, hi_d = TAU_DECAY_BOUNDS
    if not (lo_r <= init.tau_rise <= hi_r and lo_d <= init.tau_decay <= hi_d
            and init.tau_rise < init.tau_decay):
        raise BoundsViolation(f"init taus out of bounds: ({init.tau_rise}, {init.tau_decay})")

    evals = {"n": 0}
    best = {"x": (init.tau_rise, init.tau_decay), "j": None}

    def objective(x):
        r, d = float(x[0]), float(x[1])
        if not (lo_r <= r <= hi_r and lo_d <= d <= hi_d and r < d - 1e-6):
            return 1e6 + abs(r) + abs(d)
        if evals["n"] >= config.max_tau_evals:
            return 1e6
        evals["n"] += 1
        j = tau_objective(signal, BatemanParams(r, d), config)
        if best["j"] is None or j < best["j"]:
            best["j"] = j
            best["x"] = (r, d)
        return j

    x0 = np.array([init.tau_rise, init.tau_decay])
    objective(x0)  # guarantee init is a candidate
    minimize(objective, x0, method="Nelder-Mead",
             options={"maxfev": config.max_tau_evals, "xatol": 1e-3, "fatol": 1e-9})
    return BatemanParams(*best["x"])


# --- export -----------------------------------------------------------------

def decomposition_to_json(decomp: Decomposition) -> dict:
    return {
        "start_time": decomp.tonic.start_time,
        "rate": decomp.tonic.rate,
        "tonic": decomp.tonic.values.tolist(),
        "phasic_driver": decomp.phasic_driver.values.tolist(),
        "phasic": decomp.phasic.values.tolist(),
        "scrs": [
            {"onset": e.onset, "peak_time": e.peak_time,
             "amplitude": e.amplitude, "area": e.area}
            for e in decomp.scrs
        ],
        "params": {"tau_rise": decomp.params.tau_rise, "tau_decay": decomp.params.tau_decay},
        "residual_rms": decomp.residual_rms,
        "tonic_fallback": decomp.tonic_fallback,
    }


def discrete_decomposition_to_json(decomp: DiscreteDecomposition) -> dict:
    return {
        "start_time": decomp.tonic.start_time,
        "rate": decomp.tonic.rate,
        "tonic": decomp.tonic.values.tolist(),
        "driver": decomp.driver.values.tolist() if decomp.driver is not None else [],
        "overshoot": decomp.overshoot.values.tolist(),
        "impulses": [
            {"onset": e.onset, "peak_time": e.peak_time,
             "amplitude": e.amplitude, "area": e.area}
            for e in decomp.impulses
        ],
        "params": {"tau_rise": decomp.params.tau_rise, "tau_decay": decomp.params.tau_decay},
        "tonic_fallback": decomp.tonic_fallback,
    }
