"""Pure-Python/numpy implementations of the streaming kernels.

Behaviourally identical to the compiled ``_ckernels`` module; used when the
extension is not built or when ``SUBBAND_FFC_PURE_PYTHON`` is set.
"""

import math

import numpy as np
from scipy import signal

from ..errors import DimensionError, DivergenceError, NumericInputError

BACKEND = "python"


def _check(x):
    if not math.isfinite(x):
        raise NumericInputError(f"non-finite input sample: {x!r}")


def _check_block(x):
    if not np.all(np.isfinite(x)):
        raise NumericInputError("non-finite value in input block")


class LFilter:
    """Transposed direct-form II filter with one delay line of length max(nb, na)."""

    def __init__(self, b, a):
        b = np.asarray(b, dtype=float)
        a = np.asarray(a, dtype=float)
        n = max(b.size, a.size)
        self.b = np.zeros(n)
        self.a = np.zeros(n)
        self.b[: b.size] = b / a[0]
        self.a[: a.size] = a / a[0]
        self._bl = self.b.tolist()
        self._al = self.a.tolist()
        self._z = [0.0] * (n - 1)

    @property
    def state(self):
        return np.array(self._z)

    def reset(self):
        self._z = [0.0] * len(self._z)

    def step(self, x):
        _check(x)
        z = self._z
        b = self._bl
        a = self._al
        y = b[0] * x + (z[0] if z else 0.0)
        m = len(z)
        for i in range(m - 1):
            z[i] = b[i + 1] * x + z[i + 1] - a[i + 1] * y
        if m:
            z[m - 1] = b[m] * x - a[m] * y
        return y

    def run(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        _check_block(x)
        if not self._z:
            return self.b[0] * x
        y, zf = signal.lfilter(self.b, self.a, x, zi=np.array(self._z))
        self._z = zf.tolist()
        return y


class SOSFilter:
    """Cascade of transposed direct-form II biquads, rows ``[b0 b1 b2 1 a1 a2]``."""

    def __init__(self, sos):
        sos = np.array(sos, dtype=float, ndmin=2)
        if sos.shape[1] != 6:
            raise DimensionError("sos must have 6 columns")
        sos = sos.copy()
        sos[:, :3] /= sos[:, 3:4]
        sos[:, 3:] /= sos[:, 3:4]
        self.sos = sos
        self._rows = sos.tolist()
        self._z = np.zeros((sos.shape[0], 2))
        self._zl = [[0.0, 0.0] for _ in range(sos.shape[0])]

    @property
    def state(self):
        return np.array(self._zl)

    def reset(self):
        self._zl = [[0.0, 0.0] for _ in self._zl]

    def step(self, x):
        _check(x)
        for (b0, b1, b2, _, a1, a2), z in zip(self._rows, self._zl):
            y = b0 * x + z[0]
            z[0] = b1 * x + z[1] - a1 * y
            z[1] = b2 * x - a2 * y
            x = y
        return x

    def run(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        _check_block(x)
        y, zf = signal.sosfilt(self.sos, x, zi=np.array(self._zl))
        self._zl = zf.tolist()
        return y


class FIRBank:
    """N FIR filters of common length sharing one input delay line."""

    def __init__(self, h):
        h = np.array(h, dtype=float, ndmin=2)
        self.h = h
        self._hist = np.zeros(h.shape[1])
        self._out = np.zeros(h.shape[0])

    def reset(self):
        self._hist[:] = 0.0
        self._out[:] = 0.0

    def step(self, x):
        """Push ``x`` and return all N outputs (a reused buffer)."""
        _check(x)
        hist = self._hist
        hist[1:] = hist[:-1]
        hist[0] = x
        np.dot(self.h, hist, out=self._out)
        return self._out


class ShiftRegister:
    """Most-recent-first history written into a caller-supplied float64 view."""

    def __init__(self, buf):
        self.values = buf

    def push(self, x):
        _check(x)
        v = self.values
        if v.size > 1:
            v[1:] = v[:-1]
        if v.size:
            v[0] = x

    def dot(self, w):
        return float(np.dot(self.values, w))

    def reset(self):
        self.values[:] = 0.0


class RLS:
    """Exponentially weighted RLS core operating in place on ``theta`` and ``F``."""

    def __init__(self, theta, F, lam, trace_ceiling):
        self.theta = theta
        self.F = F
        self.lam = float(lam)
        self.trace_ceiling = float(trace_ceiling)
        self.p = theta.size

    def predict(self, phi):
        if phi.size != self.p:
            raise DimensionError(f"regressor length {phi.size} != {self.p}")
        return float(np.dot(self.theta, phi))

    def normalize(self, eps0, phi):
        if phi.size != self.p:
            raise DimensionError(f"regressor length {phi.size} != {self.p}")
        lam = self.lam
        return lam * eps0 / (lam + float(phi @ self.F @ phi))

    def update(self, phi, eps0):
        if phi.size != self.p:
            raise DimensionError(f"regressor length {phi.size} != {self.p}")
        lam = self.lam
        Fphi = self.F @ phi
        denom = lam + float(phi @ Fphi)
        eps = lam * eps0 / denom
        theta = self.theta + Fphi * (eps / lam)
        F = (self.F - np.outer(Fphi, Fphi) / denom) / lam
        F = 0.5 * (F + F.T)
        tr = float(np.trace(F))
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(F))
                and math.isfinite(eps)):
            raise DivergenceError("RLS update produced non-finite values")
        if tr > self.trace_ceiling:
            raise DivergenceError(
                f"RLS gain trace {tr:.3g} exceeds ceiling {self.trace_ceiling:.3g}")
        self.theta[:] = theta
        self.F[:] = F
        return eps


class DriftMonitor:
    """Windowed relative parameter drift ``|th(k)-th(k-W)| / max(|th(k)|, 1e-9)``.

    ``quiet`` counts consecutive samples whose drift stayed below ``delta``;
    samples without a full lag window count as violations.
    """

    def __init__(self, p, window, delta):
        self.window = int(window)
        self.delta = float(delta)
        self._ring = np.zeros((self.window + 1, p))
        self.count = 0
        self.quiet = 0
        self.last_drift = math.inf

    def reset(self):
        self._ring[:] = 0.0
        self.count = 0
        self.quiet = 0
        self.last_drift = math.inf

    def push(self, theta):
        W = self.window
        slot = self.count % (W + 1)
        self._ring[slot] = theta
        self.count += 1
        if self.count <= W:
            self.quiet = 0
            return self.last_drift
        old = self._ring[self.count % (W + 1)]
        num = math.sqrt(float(np.dot(theta - old, theta - old)))
        den = max(math.sqrt(float(np.dot(theta, theta))), 1e-9)
        d = num / den
        self.last_drift = d
        if d < self.delta:
            self.quiet += 1
        else:
            self.quiet = 0
        return d


def schur_stable(den):
    """Step-down (Schur-Cohn) test: True iff every root of the polynomial
    ``den`` (in ``z^-1``, ``den[0] != 0``) lies strictly inside the unit circle."""
    a = [float(x) for x in den]
    for m in range(len(a) - 1, 0, -1):
        if not math.isfinite(a[m]):
            return False
        k = a[m] / a[0]
        if abs(k) >= 1.0:
            return False
        d = 1.0 - k * k
        a = [(a[j] - k * a[m - j]) / d for j in range(m)]
    return True
