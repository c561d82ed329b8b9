"""Spectral estimates, in-band FRF comparisons and the optimal-controller reference."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import signal

from .errors import ConfigurationError
from .lti import TransferFunction, freq_response

ATTENUATION_CAP_DB = 120.0
GAIN_FLOOR = 1e-8


@dataclass
class PsdEstimate:
    freqs_hz: np.ndarray
    density: np.ndarray
    segment_len: int
    overlap: float
    window: str = "hann"

    @property
    def df(self):
        return float(self.freqs_hz[1] - self.freqs_hz[0])

    def total_power(self):
        return float(np.sum(self.density) * self.df)

    def band_power(self, lo_hz, hi_hz, include_hi=False):
        f = self.freqs_hz
        mask = (f >= lo_hz) & ((f <= hi_hz) if include_hi else (f < hi_hz))
        return float(np.sum(self.density[mask]) * self.df)


def welch_psd(x, segment_len=4096, overlap=0.5, fs=1.0):
    """One-sided Hann-windowed Welch density (power per Hz)."""
    x = np.asarray(x, dtype=float)
    if segment_len < 8:
        raise ConfigurationError("segment_len must be >= 8")
    if x.size < segment_len:
        raise ConfigurationError(
            f"signal of {x.size} samples is shorter than one {segment_len}-sample segment")
    if not 0.0 <= overlap <= 0.9:
        raise ConfigurationError("overlap must lie in [0, 0.9]")
    f, pxx = signal.welch(x, fs=fs, window="hann", nperseg=segment_len,
                          noverlap=int(round(overlap * segment_len)),
                          detrend=False, scaling="density", return_onesided=True)
    return PsdEstimate(f, pxx, int(segment_len), float(overlap))


def _stream(trace_or_array, name="e"):
    return np.asarray(getattr(trace_or_array, name, trace_or_array), dtype=float)


def band_powers(x, edges, fs, segment_len=4096, overlap=0.5):
    psd = welch_psd(x, segment_len, overlap, fs)
    last = len(edges) - 1
    return [psd.band_power(lo, hi, include_hi=(i == last)) for i, (lo, hi) in enumerate(edges)]


def attenuation_report(trace_off, trace_on, bank, start=0, stop=None,
                       segment_len=4096, overlap=0.5):
    """Per-band ``10 log10(P_off / P_on)`` of the error signal, capped at +-120 dB."""
    e_off = _stream(trace_off)[start:stop]
    e_on = _stream(trace_on)[start:stop]
    if e_off.size != e_on.size:
        raise ConfigurationError("attenuation windows must have equal length")
    seg = min(segment_len, e_off.size)
    p_off = band_powers(e_off, bank.band_edges, bank.fs, seg, overlap)
    p_on = band_powers(e_on, bank.band_edges, bank.fs, seg, overlap)
    out = []
    for po, pn in zip(p_off, p_on):
        if po == 0.0 and pn == 0.0:
            out.append(0.0)
        elif pn == 0.0:
            out.append(ATTENUATION_CAP_DB)
        elif po == 0.0:
            out.append(-ATTENUATION_CAP_DB)
        else:
            db = 10.0 * (math.log10(po) - math.log10(pn))
            out.append(max(-ATTENUATION_CAP_DB, min(ATTENUATION_CAP_DB, db)))
    return out


def band_grid(edges, fraction=0.8, n=64):
    lo, hi = edges
    margin = 0.5 * (1.0 - fraction) * (hi - lo)
    return np.linspace(lo + margin, hi - margin, n)


def _wrap_deg(x):
    return (np.asarray(x) + 180.0) % 360.0 - 180.0


def frf_compare(tf_a, tf_b, edges, fraction=0.8, n=64):
    """Max magnitude (dB) and phase (deg) differences over the central part of a band."""
    if tf_a.fs != tf_b.fs:
        raise ConfigurationError("frf_compare needs a common sample rate")
    f = band_grid(edges, fraction, n)
    ha = freq_response(tf_a, f)
    hb = freq_response(tf_b, f)
    abs_err = float(np.max(np.abs(ha - hb)))
    ma, mb = np.abs(ha), np.abs(hb)
    with np.errstate(divide="ignore", invalid="ignore"):
        dmag = np.abs(20.0 * np.log10(ma) - 20.0 * np.log10(mb))
    both = (ma > 0) & (mb > 0)
    dph = np.zeros_like(ma)
    dph[both] = np.abs(_wrap_deg(np.degrees(np.angle(ha[both]) - np.angle(hb[both]))))
    dph[~both & ((ma > 0) | (mb > 0))] = 180.0
    same = ha == hb
    dmag[same] = 0.0
    dph[same] = 0.0
    return {"mag_db": float(np.max(dmag)), "phase_deg": float(np.max(dph)),
            "max_abs_error": abs_err}


@dataclass
class OptimalControllerReference:
    band: int
    freqs_hz: np.ndarray
    target: np.ndarray
    fir: np.ndarray = None
    delay: int = 0
    residual_max: float = math.nan
    residual_rel: float = math.nan
    undefined_in_band: bool = False
    fs: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def tf(self):
        if self.fir is None:
            return None
        return TransferFunction(self.fir, [1.0], self.fs)

    def to_dict(self):
        return {"band": self.band, "fir": None if self.fir is None else self.fir.tolist(),
                "delay": self.delay, "residual_max": self.residual_max,
                "residual_rel": self.residual_rel,
                "undefined_in_band": self.undefined_in_band}


def fit_fir(freqs_hz, target, n_taps, fs, max_delay=0):
    """Least-squares real FIR whose response best matches ``target`` delayed by
    ``d`` samples, ``d`` in ``0..max_delay`` chosen for the smallest residual.
    """
    w = 2.0 * np.pi * np.asarray(freqs_hz) / fs
    E = np.exp(-1j * np.outer(w, np.arange(n_taps)))
    A = np.vstack([E.real, E.imag])
    best = None
    for d in range(int(max_delay) + 1):
        tgt = target * np.exp(-1j * w * d)
        rhs = np.concatenate([tgt.real, tgt.imag])
        c, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        res = np.abs(E @ c - tgt)
        key = float(np.sum(res ** 2))
        if best is None or key < best[0] - 1e-15:
            best = (key, d, c, res)
    _, d, c, res = best
    scale = math.sqrt(float(np.mean(np.abs(target) ** 2)))
    rel = math.sqrt(float(np.mean(res ** 2))) / scale if scale > 0 else 0.0
    return c, d, float(np.max(res)) if res.size else 0.0, rel


def optimal_target(P, S_D, R, freqs_hz, analyzer=None):
    """``-P / (S_D R)`` on a grid, optionally divided by the analyser response."""
    hp = freq_response(P, freqs_hz)
    den = freq_response(S_D, freqs_hz) * freq_response(R, freqs_hz)
    if analyzer is not None:
        den = den * freq_response(analyzer, freqs_hz)
    if np.any(np.abs(den) < GAIN_FLOOR):
        return None
    return -hp / den


def optimal_controller(scenario, band, n_w, bank=None, n_grid=128, fraction=0.8):
    """Reference FIR for region ``band`` fitted to the zero-error controller.

    The controller of region i acts on ``a_i = H_i a``, so when ``bank`` has
    more than one region the target is ``-P / (S_D R H_i)``; the fit allows a
    common pure delay of up to ``n_w // 2`` samples.
    """
    bank = bank if bank is not None else scenario.make_bank()
    R = scenario.plant_for_region(band)
    edges = bank.band_edges[band]
    f = band_grid(edges, fraction, n_grid)
    analyzer = None
    if bank.num_regions > 1:
        analyzer = TransferFunction(bank.coeffs[band], [1.0], bank.fs)
    tgt = optimal_target(scenario.primary_path, scenario.sensor_path, R, f, analyzer)
    if tgt is None:
        return OptimalControllerReference(band, f, np.full(f.size, np.nan),
                                          undefined_in_band=True, fs=bank.fs)
    c, d, rmax, rrel = fit_fir(f, tgt, n_w, bank.fs, max_delay=n_w // 2)
    return OptimalControllerReference(band, f, tgt, c, d, rmax, rrel, False, bank.fs)


def controller_fit(theta_Q, reference, edges, fraction=0.8, n=64):
    """Compare an adapted FIR with the reference fit (magnitudes and phases)."""
    tf = TransferFunction(theta_Q, [1.0], reference.fs)
    return frf_compare(tf, reference.tf, edges, fraction, n)


SETTLE_SAMPLES = 2048


def evaluation_window(events, total_samples, settle=SETTLE_SAMPLES):
    """``(start, stop)`` of the steady-state stretch used for attenuation.

    It starts ``settle`` samples after the last region froze (excitation is off
    from then on). Runs that never freeze every region, and open-loop runs
    without events, use the whole trace.
    """
    done = [ev["k"] for ev in events if ev.get("event") == "all_frozen"]
    if done:
        start = min(int(done[-1]) + 1 + settle, total_samples)
        if total_samples - start >= 2:
            return start, total_samples
    return 0, total_samples
