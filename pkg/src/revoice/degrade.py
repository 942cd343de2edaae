"""Signal degradation transforms used to synthesize training inputs.

Bandwidth truncation: low-pass at s/2 with a randomized IIR filter, downsample
to s, resample back to S. Noise injection: additive mixing at an exact SNR.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .dsp import Waveform, resample

FILTER_FAMILIES = ("butterworth", "chebyshev1", "bessel", "elliptic")

CHEBYSHEV_RIPPLE_DB = 1.0
ELLIPTIC_RIPPLE_DB = 1.0
ELLIPTIC_STOPBAND_DB = 60.0

# search window (samples) when undoing IIR group delay after the round trip
ALIGN_MAX_LAG = 1024


@dataclass(frozen=True)
class DegradationSpec:
    """Parameters of the degradation transform x = f(y)."""

    task: str  # "bwe" or "se"
    source_rate: int = 2000  # s: effective bandwidth rate after truncation
    target_rate: int = 16000  # S: rate of the ground-truth signal
    filter_families: tuple = FILTER_FAMILIES
    order_range: tuple = (2, 10)  # inclusive
    snr_db: float | None = None  # SE only
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("bwe", "se"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "bwe" and not self.source_rate < self.target_rate:
            raise ValueError(
                f"bwe needs source_rate < target_rate, got {self.source_rate} >= {self.target_rate}"
            )
        if self.task == "se" and (self.snr_db is None or not np.isfinite(self.snr_db)):
            raise ValueError("se requires a finite snr_db")
        lo, hi = self.order_range
        if not (1 <= lo <= hi <= 10):
            raise ValueError(f"order_range must lie within [1, 10], got {self.order_range}")
        unknown = set(self.filter_families) - set(FILTER_FAMILIES)
        if unknown:
            raise ValueError(f"unknown filter families: {sorted(unknown)}")

    @property
    def cutoff(self) -> float:
        return self.source_rate / 2


@dataclass(frozen=True)
class FilterDesign:
    """A stable low-pass IIR as a second-order-section cascade."""

    family: str
    order: int
    cutoff: float
    rate: int
    sos: np.ndarray = field(repr=False)

    def __post_init__(self):
        # all poles strictly inside the unit circle
        for section in self.sos:
            poles = np.roots(section[3:])
            if np.any(np.abs(poles) >= 1.0):
                raise ValueError(f"{self.family} order {self.order}: unstable filter section")

    def frequency_response(self, freqs_hz: np.ndarray) -> np.ndarray:
        _, h = sps.sosfreqz(self.sos, worN=2 * np.pi * freqs_hz / self.rate)
        return h


def design_lowpass(family: str, order: int, cutoff: float, rate: int) -> FilterDesign:
    """Design a stable low-pass SOS cascade of the given family and order."""
    if not 0 < cutoff < rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, {rate / 2}) at rate {rate}")
    if not 1 <= order <= 10:
        raise ValueError(f"order must lie in [1, 10], got {order}")
    wn = cutoff / (rate / 2)
    if family == "butterworth":
        sos = sps.butter(order, wn, btype="low", output="sos")
    elif family == "chebyshev1":
        sos = sps.cheby1(order, CHEBYSHEV_RIPPLE_DB, wn, btype="low", output="sos")
    elif family == "bessel":
        sos = sps.bessel(order, wn, btype="low", norm="mag", output="sos")
    elif family == "elliptic":
        sos = sps.ellip(
            order, ELLIPTIC_RIPPLE_DB, ELLIPTIC_STOPBAND_DB, wn, btype="low", output="sos"
        )
    else:
        raise ValueError(f"unknown filter family {family!r}")
    return FilterDesign(family=family, order=order, cutoff=cutoff, rate=rate, sos=sos)


def apply_filter(w: Waveform, f: FilterDesign) -> Waveform:
    """Causal filtering (models a transmission channel; no zero-phase trick)."""
    if f.rate != w.sample_rate:
        raise ValueError(f"filter designed at {f.rate} Hz, waveform is {w.sample_rate} Hz")
    return Waveform(samples=sps.sosfilt(f.sos, w.samples), sample_rate=w.sample_rate)


def draw_filter(spec: DegradationSpec, rng: np.random.Generator) -> FilterDesign:
    family = str(rng.choice(list(spec.filter_families)))
    order = int(rng.integers(spec.order_range[0], spec.order_range[1] + 1))
    return design_lowpass(family, order, spec.cutoff, spec.target_rate)


def align_to_reference(x: np.ndarray, ref: np.ndarray, max_lag: int = ALIGN_MAX_LAG) -> np.ndarray:
    """Shift x by the lag that maximizes cross-correlation with ref.

    Causal IIR filtering delays the signal; waveform-domain losses need the
    degraded input realigned to the target.
    """
    n = len(ref)
    corr = sps.correlate(x, ref, mode="full")
    lags = sps.correlation_lags(len(x), n, mode="full")
    window = (lags >= -max_lag) & (lags <= max_lag)
    lag = int(lags[window][np.argmax(corr[window])])
    out = np.zeros(n)
    if lag >= 0:
        out[: n - lag] = x[lag:n]
    else:
        out[-lag:] = x[: n + lag]
    return out


def degrade_bwe(
    y: Waveform,
    spec: DegradationSpec,
    rng: np.random.Generator,
    design: FilterDesign | None = None,
) -> Waveform:
    """Bandwidth truncation: low-pass at s/2, downsample to s, resample to S.

    The filter family and order are drawn from rng. Output is realigned to the
    input and has identical length and rate.
    """
    if y.sample_rate != spec.target_rate:
        raise ValueError(
            f"waveform rate {y.sample_rate} does not match spec target_rate {spec.target_rate}"
        )
    if design is None:
        design = draw_filter(spec, rng)
    filtered = apply_filter(y, design)
    low = resample(filtered, spec.source_rate)
    back = resample(low, spec.target_rate)
    samples = back.samples
    if len(samples) < len(y):
        samples = np.pad(samples, (0, len(y) - len(samples)))
    samples = align_to_reference(samples[: len(y)], y.samples)
    return Waveform(samples=samples, sample_rate=spec.target_rate)


def mix_at_snr(y: Waveform, n: Waveform, snr_db: float) -> Waveform:
    """Return y + g*n with the gain chosen so the mixture SNR is exactly snr_db."""
    if len(y) != len(n) or y.sample_rate != n.sample_rate:
        raise ValueError("signal and noise must share length and sample rate")
    y_norm = float(np.linalg.norm(y.samples))
    n_norm = float(np.linalg.norm(n.samples))
    if y_norm == 0.0 or n_norm == 0.0:
        raise ValueError("mix_at_snr requires non-silent signal and noise")
    g = y_norm / (n_norm * 10.0 ** (snr_db / 20.0))
    return Waveform(samples=y.samples + g * n.samples, sample_rate=y.sample_rate)
