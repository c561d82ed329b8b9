"""Uniform cosine-modulated FIR analysis bank.

Each analyser is a modulated copy of one Kaiser-windowed lowpass prototype::

    h_i[n] = 2 p[n] cos((pi/N)(i + 1/2)(n - (L-1)/2) + (-1)^i pi/4)

The prototype cutoff is placed so that ``|P(pi/2N)| = 1/sqrt(2)``, which makes
adjacent bands cross at -3 dB and keeps the band centres at 0 dB.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.signal.windows import kaiser

from . import _kernels
from .errors import BankDesignError, ConfigurationError, FrequencyRangeError
from .lti import TransferFunction, filter_signal, freq_response


@dataclass(frozen=True)
class BankSpec:
    num_regions: int = 4
    num_taps: int = 64
    stopband_atten_db: float = 110.0
    sample_rate_hz: float = 41760.0

    def __post_init__(self):
        if self.num_regions < 2:
            raise ConfigurationError(f"need at least 2 regions, got {self.num_regions}")
        if self.num_taps < 4 * self.num_regions:
            raise ConfigurationError(
                f"num_taps={self.num_taps} < 4*num_regions={4 * self.num_regions}")
        if not self.stopband_atten_db > 0:
            raise ConfigurationError("stopband attenuation must be positive")
        if not self.sample_rate_hz > 0:
            raise ConfigurationError("sample rate must be positive")

    def to_dict(self):
        return {"num_regions": self.num_regions, "num_taps": self.num_taps,
                "stopband_atten_db": self.stopband_atten_db,
                "sample_rate_hz": self.sample_rate_hz}


@dataclass
class FilterBank:
    """N analysers over uniform bands; ``filters[i]`` is FIR ``H_i``."""

    spec: BankSpec
    coeffs: np.ndarray
    prototype: np.ndarray = field(repr=False)
    attenuation_db: float = math.inf

    @property
    def num_regions(self):
        return self.coeffs.shape[0]

    @property
    def fs(self):
        return self.spec.sample_rate_hz

    @property
    def band_width_hz(self):
        return self.fs / (2 * self.num_regions)

    @property
    def filters(self):
        return [TransferFunction(h, [1.0], self.fs) for h in self.coeffs]

    @property
    def band_edges(self):
        w = self.band_width_hz
        return [(i * w, (i + 1) * w) for i in range(self.num_regions)]

    def center_hz(self, i):
        return (i + 0.5) * self.band_width_hz

    def band_grid(self, i, fraction=0.8, n=64):
        """``n`` frequencies spanning the central ``fraction`` of band ``i``."""
        lo, hi = self.band_edges[i]
        margin = 0.5 * (1.0 - fraction) * (hi - lo)
        return np.linspace(lo + margin, hi - margin, n)

    def response(self, i, freqs_hz):
        return freq_response(TransferFunction(self.coeffs[i], [1.0], self.fs), freqs_hz)


class _IdentitySpec:
    """Single full-band 'bank' for the N = 1 reduction."""

    num_regions = 1
    num_taps = 1
    stopband_atten_db = math.inf

    def __init__(self, fs):
        self.sample_rate_hz = float(fs)

    def to_dict(self):
        return {"num_regions": 1, "num_taps": 1, "stopband_atten_db": None,
                "sample_rate_hz": self.sample_rate_hz}


def identity_bank(fs):
    """Degenerate one-region bank whose only analyser is the identity."""
    return FilterBank(_IdentitySpec(fs), np.ones((1, 1)), np.ones(1))


def kaiser_beta(atten_db):
    a = float(atten_db)
    if a > 50:
        return 0.1102 * (a - 8.7)
    if a >= 21:
        return 0.5842 * (a - 21) ** 0.4 + 0.07886 * (a - 21)
    return 0.0


def _prototype(L, cutoff, beta):
    n = np.arange(L) - (L - 1) / 2.0
    h = (cutoff / np.pi) * np.sinc(cutoff * n / np.pi) * kaiser(L, beta)
    return h / h.sum()


def _gain_at(p, w):
    n = np.arange(p.size) - (p.size - 1) / 2.0
    return float(np.sum(p * np.cos(w * n)))


def design_prototype(num_taps, num_regions, atten_db):
    """Kaiser lowpass whose zero-phase gain at pi/(2N) is 1/sqrt(2).

    The sinc cutoff is found by bisection; the window shape comes from the
    standard Kaiser attenuation formula.
    """
    beta = kaiser_beta(atten_db)
    edge = np.pi / (2 * num_regions)
    target = 1.0 / math.sqrt(2.0)
    lo, hi = 0.5 * edge, min(2.0 * edge, np.pi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _gain_at(_prototype(num_taps, mid, beta), edge) < target:
            lo = mid
        else:
            hi = mid
    return _prototype(num_taps, 0.5 * (lo + hi), beta)


def modulate(prototype, num_regions):
    L = prototype.size
    n = np.arange(L) - (L - 1) / 2.0
    rows = []
    for i in range(num_regions):
        phase = (np.pi / 4) * (-1) ** i
        rows.append(2.0 * prototype * np.cos((np.pi / num_regions) * (i + 0.5) * n + phase))
    return np.array(rows)


def stopband_attenuation(coeffs, fs, n_grid=2048):
    """Worst-case attenuation (dB, relative to each band-centre gain) over
    frequencies at least 1.5 band widths away from that band's centre.
    """
    N, _ = coeffs.shape
    width = fs / (2 * N)
    f = np.linspace(0.0, fs / 2, n_grid + 1)
    worst = math.inf
    for i in range(N):
        tf = TransferFunction(coeffs[i], [1.0], fs)
        c = (i + 0.5) * width
        ref = abs(freq_response(tf, [c])[0])
        mask = np.abs(f - c) >= 1.5 * width - 1e-9
        if not np.any(mask):
            continue
        peak = float(np.max(np.abs(freq_response(tf, f[mask]))))
        worst = min(worst, 20.0 * math.log10(ref / max(peak, 1e-300)))
    return worst


def design_bank(spec, strict=True):
    """Design the cosine-modulated analysis bank for ``spec``.

    Raises :class:`BankDesignError` (carrying the achieved attenuation) when
    ``strict`` and the measured stopband attenuation misses the target.
    """
    p = design_prototype(spec.num_taps, spec.num_regions, spec.stopband_atten_db)
    coeffs = modulate(p, spec.num_regions)
    achieved = stopband_attenuation(coeffs, spec.sample_rate_hz)
    bank = FilterBank(spec, coeffs, p, achieved)
    if strict and achieved < spec.stopband_atten_db:
        raise BankDesignError(
            f"achieved {achieved:.1f} dB stopband attenuation, target "
            f"{spec.stopband_atten_db:.1f} dB with {spec.num_taps} taps",
            achieved, bank)
    return bank


def bank_from_coeffs(spec, coeffs):
    """Rebuild a bank from stored analyser coefficients (no redesign)."""
    coeffs = np.array(coeffs, dtype=float, ndmin=2)
    if coeffs.shape != (spec.num_regions, spec.num_taps):
        raise ConfigurationError(
            f"expected {spec.num_regions} x {spec.num_taps} coefficients, "
            f"got {coeffs.shape[0]} x {coeffs.shape[1]}")
    if not np.all(np.isfinite(coeffs)):
        raise ConfigurationError("bank coefficients contain non-finite values")
    return FilterBank(spec, coeffs, None,
                      stopband_attenuation(coeffs, spec.sample_rate_hz))


@dataclass(frozen=True)
class IsolationReport:
    """Measured isolation of a bank, all figures in dB relative to each
    analyser's gain at its own band centre."""

    nonadjacent_center_db: np.ndarray   # (N, N); NaN where |i - j| <= 1
    ripple_db: np.ndarray               # (N, 2): min and max over the central band
    stopband_atten_db: float

    @property
    def worst_nonadjacent_db(self):
        vals = self.nonadjacent_center_db[np.isfinite(self.nonadjacent_center_db)]
        return float(np.max(vals)) if vals.size else -math.inf

    @property
    def worst_ripple_db(self):
        return float(np.max(np.abs(self.ripple_db)))

    def to_dict(self):
        return {"nonadjacent_center_db": [[None if not np.isfinite(x) else float(x)
                                           for x in row]
                                          for row in self.nonadjacent_center_db],
                "ripple_db": self.ripple_db.tolist(),
                "worst_nonadjacent_db": self.worst_nonadjacent_db,
                "worst_ripple_db": self.worst_ripple_db,
                "stopband_atten_db": self.stopband_atten_db}


def isolation_report(bank, fraction=0.6, n=201):
    """Gain of every analyser at each non-adjacent band centre, and its
    passband ripple over the central ``fraction`` of its own band."""
    N = bank.num_regions
    centers = np.array([bank.center_hz(j) for j in range(N)])
    cross = np.full((N, N), np.nan)
    ripple = np.zeros((N, 2))
    for i in range(N):
        tf = TransferFunction(bank.coeffs[i], [1.0], bank.fs)
        ref_db = 20.0 * math.log10(abs(freq_response(tf, [centers[i]])[0]))
        gains_db = 20.0 * np.log10(np.maximum(np.abs(freq_response(tf, centers)), 1e-300))
        far = np.abs(np.arange(N) - i) > 1
        cross[i, far] = gains_db[far] - ref_db
        band_db = 20.0 * np.log10(np.abs(freq_response(tf, bank.band_grid(i, fraction, n))))
        ripple[i] = band_db.min() - ref_db, band_db.max() - ref_db
    return IsolationReport(cross, ripple, bank.attenuation_db)


class BankAnalyzer:
    """Streaming analysis: one input sample in, N subband samples out."""

    def __init__(self, bank):
        self.bank = bank
        self._k = _kernels.FIRBank(bank.coeffs)

    def step(self, x):
        """Return the N subband outputs for ``x`` (buffer reused across calls)."""
        return self._k.step(x)

    def reset(self):
        self._k.reset()


def analyze(bank, x):
    """Apply every analyser to the same input; returns an (N, len(x)) array."""
    x = np.asarray(x, dtype=float)
    out = np.empty((bank.num_regions, x.size))
    for i, h in enumerate(bank.coeffs):
        out[i] = filter_signal(TransferFunction(h, [1.0], bank.fs), x)
    return out


def band_of_frequency(bank, f_hz):
    """Index of the band containing ``f_hz``; a shared edge belongs to the upper band."""
    nyq = bank.fs / 2.0
    if not 0.0 <= f_hz < nyq:
        raise FrequencyRangeError(f"frequency {f_hz!r} outside [0, {nyq:g})")
    return min(int(f_hz // bank.band_width_hz), bank.num_regions - 1)
