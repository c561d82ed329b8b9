"""Discrete-time LTI transfer functions in the backward-shift operator.

Coefficients are stored in ascending powers of ``q^-1``::

    H(q^-1) = (b0 + b1 q^-1 + ... + b_nb q^-nb) / (1 + a1 q^-1 + ... + a_na q^-na)

High-order systems may additionally carry a second-order-section form
(``sos``), which is what gets realised for filtering and frequency-response
evaluation; ``b``/``a`` then remain the expanded single rational view.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import signal

from . import _kernels
from .errors import ConfigurationError, FrequencyRangeError, NumericInputError

STABILITY_MARGIN = 1e-9


def _coeffs(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigurationError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite values")
    return arr


class TransferFunction:
    """Rational discrete-time system ``B(q^-1)/A(q^-1)`` at a given sample rate.

    Instances are immutable; coefficient arrays are returned as read-only views.
    """

    __slots__ = ("_b", "_a", "_sos", "fs")

    def __init__(self, b, a=(1.0,), fs=1.0, sos=None):
        b = _coeffs(b, "b")
        a = _coeffs(a, "a")
        if a[0] == 0.0:
            raise ConfigurationError("leading denominator coefficient a0 must be nonzero")
        if not (math.isfinite(fs) and fs > 0):
            raise ConfigurationError(f"sample rate must be positive, got {fs!r}")
        b /= a[0]
        a /= a[0]
        b.setflags(write=False)
        a.setflags(write=False)
        self._b = b
        self._a = a
        if sos is not None:
            sos = np.array(sos, dtype=float, ndmin=2)
            if sos.shape[1] != 6 or not np.all(np.isfinite(sos)):
                raise ConfigurationError("sos must be a finite (n, 6) array")
            if np.any(sos[:, 3] == 0.0):
                raise ConfigurationError("sos rows need a nonzero a0")
            sos = sos.copy()
            sos[:, :3] /= sos[:, 3:4]
            sos[:, 3:] /= sos[:, 3:4]
            sos.setflags(write=False)
        self._sos = sos
        self.fs = float(fs)

    @classmethod
    def from_sos(cls, sos, fs=1.0):
        sos = np.array(sos, dtype=float, ndmin=2)
        b = np.array([1.0])
        a = np.array([1.0])
        for row in sos:
            b = np.convolve(b, row[:3] / row[3])
            a = np.convolve(a, row[3:] / row[3])
        return cls(np.trim_zeros(b, "b") if np.any(b) else [0.0],
                   np.trim_zeros(a, "b"), fs, sos=sos)

    @classmethod
    def gain(cls, g, fs=1.0):
        return cls([g], [1.0], fs)

    @classmethod
    def delay(cls, d, fs=1.0):
        b = np.zeros(int(d) + 1)
        b[-1] = 1.0
        return cls(b, [1.0], fs)

    @property
    def b(self):
        return self._b

    @property
    def a(self):
        return self._a

    @property
    def sos(self):
        return self._sos

    @property
    def nb(self):
        return self._b.size - 1

    @property
    def na(self):
        return self._a.size - 1

    @property
    def is_fir(self):
        if self._sos is not None:
            return bool(np.all(self._sos[:, 4:] == 0.0))
        return bool(np.all(self._a[1:] == 0.0))

    def poles(self):
        if self._sos is not None:
            return np.concatenate([np.roots(np.trim_zeros(r[3:], "b"))
                                   for r in self._sos])
        return np.roots(np.trim_zeros(self._a, "b"))

    def zeros(self):
        if self._sos is not None:
            return np.concatenate([np.roots(np.trim_zeros(r[:3], "b"))
                                   if np.any(r[:3]) else np.array([])
                                   for r in self._sos])
        b = np.trim_zeros(self._b, "b")
        return np.roots(b) if b.size else np.array([])

    def scaled(self, g):
        sos = None
        if self._sos is not None:
            sos = np.array(self._sos)
            sos[0, :3] *= g
        return TransferFunction(self._b * g, self._a, self.fs, sos=sos)

    def to_dict(self):
        d = {"b": self._b.tolist(), "a": self._a.tolist(), "fs_hz": self.fs}
        if self._sos is not None:
            d["sos"] = self._sos.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            fs = float(d["fs_hz"])
            if "sos" in d:
                return cls(d.get("b", [1.0]), d.get("a", [1.0]), fs, sos=d["sos"])
            return cls(d["b"], d.get("a", [1.0]), fs)
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"bad transfer-function record: {exc}") from exc

    def __eq__(self, other):
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return (self.fs == other.fs and np.array_equal(self._b, other._b)
                and np.array_equal(self._a, other._a))

    __hash__ = None

    def __repr__(self):
        kind = f"sos[{len(self._sos)}]" if self._sos is not None else "poly"
        return (f"TransferFunction(nb={self.nb}, na={self.na}, fs={self.fs:g}, "
                f"{kind})")


class FilterState:
    """Streaming realisation of a :class:`TransferFunction` (single owner)."""

    def __init__(self, tf):
        self.owner = tf
        if tf.sos is not None:
            self._k = _kernels.SOSFilter(tf.sos)
        else:
            self._k = _kernels.LFilter(tf.b, tf.a)

    @property
    def delay_line(self):
        return self._k.state

    def step(self, x):
        return self._k.step(x)

    def run(self, x):
        return self._k.run(x)

    def reset(self):
        self._k.reset()


@dataclass(frozen=True)
class FrequencyResponsePoint:
    freq_hz: float
    value: complex

    @property
    def magnitude(self):
        return abs(self.value)

    @property
    def magnitude_db(self):
        return 20.0 * math.log10(max(abs(self.value), 1e-300))

    @property
    def phase_deg(self):
        return math.degrees(math.atan2(self.value.imag, self.value.real))


def filter_step(state, x):
    """Advance ``state`` by one sample and return the output."""
    return state.step(float(x))


def filter_signal(tf, x):
    """Filter a whole sequence from a zero initial state."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericInputError("non-finite value in input sequence")
    if x.size == 0:
        return np.zeros(0)
    return FilterState(tf).run(x)


def _poly_at(c, zinv):
    # c0 + c1 zinv + c2 zinv^2 + ... (Horner from the highest power)
    return np.polyval(c[::-1], zinv)


def freq_response(tf, freqs_hz):
    """Complex gain at each frequency (Hz), i.e. B(e^-jw)/A(e^-jw), w = 2 pi f / fs."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    nyq = tf.fs / 2.0
    if np.any(f < 0.0) or np.any(f > nyq * (1.0 + 1e-12)):
        raise FrequencyRangeError(f"frequencies must lie in [0, {nyq:g}] Hz")
    zinv = np.exp(-2j * np.pi * f / tf.fs)
    if tf.sos is not None:
        h = np.ones_like(zinv)
        for row in tf.sos:
            h *= _poly_at(row[:3], zinv) / _poly_at(row[3:], zinv)
        return h
    return _poly_at(tf.b, zinv) / _poly_at(tf.a, zinv)


def frequency_points(tf, freqs_hz):
    h = freq_response(tf, freqs_hz)
    return [FrequencyResponsePoint(float(f), complex(v))
            for f, v in zip(np.atleast_1d(freqs_hz), h)]


def is_stable(tf):
    """True iff every pole lies strictly inside the unit circle (with margin)."""
    if tf.is_fir:
        return True
    p = tf.poles()
    return bool(p.size == 0 or np.max(np.abs(p)) < 1.0 - STABILITY_MARGIN)


def delay_sos(d):
    """SOS rows realising ``q^-d``: two samples per row plus one odd row."""
    rows = [[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]] * (int(d) // 2)
    if d % 2:
        rows.append([0.0, 1.0, 0.0, 1.0, 0.0, 0.0])
    return np.array(rows, dtype=float).reshape(-1, 6)


def _as_sos(tf):
    """SOS rows of ``tf``; leading numerator zeros become explicit delay rows
    (``tf2sos`` would silently drop them)."""
    if tf.sos is not None:
        return np.asarray(tf.sos)
    b = np.asarray(tf.b)
    nz = np.flatnonzero(b)
    if nz.size == 0:
        return np.array([[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]])
    lead = int(nz[0])
    rows = [signal.tf2sos(b[lead:], tf.a)]
    if lead:
        rows.append(delay_sos(lead))
    return np.vstack(rows)


def cascade(tf1, tf2):
    """Series connection ``tf2(tf1(x))``."""
    if tf1.fs != tf2.fs:
        raise ConfigurationError(
            f"sample-rate mismatch: {tf1.fs:g} Hz vs {tf2.fs:g} Hz")
    b = np.convolve(tf1.b, tf2.b)
    a = np.convolve(tf1.a, tf2.a)
    sos = None
    if tf1.sos is not None or tf2.sos is not None:
        sos = np.vstack([_as_sos(tf1), _as_sos(tf2)])
    return TransferFunction(b, a, tf1.fs, sos=sos)


def impulse_response(tf, n):
    x = np.zeros(int(n))
    if n:
        x[0] = 1.0
    return filter_signal(tf, x)


def decay_horizon(tf, tol=1e-10):
    """Number of samples after which ``|h(k)|`` stays below ``tol``.

    The impulse response is simulated over a length set by the slowest pole
    and doubled until its last quarter is far below ``tol``; the horizon is
    one past the last sample at or above ``tol``.
    """
    if tf.is_fir:
        if tf.sos is not None:
            return 2 * len(tf.sos) + 1
        return tf.b.size
    r = float(np.max(np.abs(tf.poles())))
    if r >= 1.0:
        raise ConfigurationError("unstable system has no decay horizon")
    n = 4 * int(math.ceil(math.log(tol) / math.log(max(r, 1e-3)))) + 8 * (tf.na + tf.nb) + 64
    while True:
        h = np.abs(impulse_response(tf, n))
        if np.all(h[-(n // 4):] < 1e-3 * tol):
            above = np.flatnonzero(h >= tol)
            return int(above[-1]) + 1 if above.size else 0
        n *= 2
