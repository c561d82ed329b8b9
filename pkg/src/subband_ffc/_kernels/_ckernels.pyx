# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the streaming kernels.

Same classes, signatures and error behaviour as ``_pykernels``; only the
per-sample paths (``step``, ``push``, ``update``) are moved to C loops. Block
filtering still goes through scipy.
"""

from libc.math cimport isfinite, sqrt, fabs
from libc.string cimport memmove, memcpy

import numpy as np
from scipy import signal

from ..errors import DimensionError, DivergenceError, NumericInputError

BACKEND = "cython"


cdef inline void _check(double x) except *:
    if not isfinite(x):
        raise NumericInputError(f"non-finite input sample: {x!r}")


def _check_block(x):
    if not np.all(np.isfinite(x)):
        raise NumericInputError("non-finite value in input block")


cdef class LFilter:
    """Transposed direct-form II filter with one delay line of length max(nb, na)."""

    cdef public object b
    cdef public object a
    cdef double[::1] _b
    cdef double[::1] _a
    cdef double[::1] _z
    cdef Py_ssize_t _m

    def __init__(self, b, a):
        b = np.asarray(b, dtype=float)
        a = np.asarray(a, dtype=float)
        n = max(b.size, a.size)
        self.b = np.zeros(n)
        self.a = np.zeros(n)
        self.b[: b.size] = b / a[0]
        self.a[: a.size] = a / a[0]
        self._b = self.b
        self._a = self.a
        self._m = n - 1
        self._z = np.zeros(max(n - 1, 1))

    @property
    def state(self):
        return np.array(self._z[: self._m])

    def reset(self):
        self._z[:] = 0.0

    cpdef double step(self, double x) except? -1.0:
        _check(x)
        cdef Py_ssize_t i, m = self._m
        cdef double y
        if m == 0:
            return self._b[0] * x
        y = self._b[0] * x + self._z[0]
        for i in range(m - 1):
            self._z[i] = self._b[i + 1] * x + self._z[i + 1] - self._a[i + 1] * y
        self._z[m - 1] = self._b[m] * x - self._a[m] * y
        return y

    def run(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        _check_block(x)
        if self._m == 0:
            return self.b[0] * x
        y, zf = signal.lfilter(self.b, self.a, x, zi=np.array(self._z[: self._m]))
        np.asarray(self._z)[: self._m] = zf
        return y


cdef class SOSFilter:
    """Cascade of transposed direct-form II biquads, rows ``[b0 b1 b2 1 a1 a2]``."""

    cdef public object sos
    cdef double[:, ::1] _s
    cdef double[:, ::1] _z
    cdef Py_ssize_t _n

    def __init__(self, sos):
        sos = np.array(sos, dtype=float, ndmin=2)
        if sos.shape[1] != 6:
            raise DimensionError("sos must have 6 columns")
        sos = sos.copy()
        sos[:, :3] /= sos[:, 3:4]
        sos[:, 3:] /= sos[:, 3:4]
        self.sos = np.ascontiguousarray(sos)
        self._s = self.sos
        self._n = sos.shape[0]
        self._z = np.zeros((self._n, 2))

    @property
    def state(self):
        return np.array(self._z)

    def reset(self):
        self._z[:, :] = 0.0

    cpdef double step(self, double x) except? -1.0:
        _check(x)
        cdef Py_ssize_t r
        cdef double y
        for r in range(self._n):
            y = self._s[r, 0] * x + self._z[r, 0]
            self._z[r, 0] = self._s[r, 1] * x + self._z[r, 1] - self._s[r, 4] * y
            self._z[r, 1] = self._s[r, 2] * x - self._s[r, 5] * y
            x = y
        return x

    def run(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        _check_block(x)
        y, zf = signal.sosfilt(self.sos, x, zi=np.array(self._z))
        np.asarray(self._z)[:, :] = zf
        return y


cdef class FIRBank:
    """N FIR filters of common length sharing one input delay line."""

    cdef public object h
    cdef double[:, ::1] _h
    cdef double[::1] _hist
    cdef object _out_arr
    cdef double[::1] _out
    cdef Py_ssize_t _n, _L

    def __init__(self, h):
        h = np.ascontiguousarray(np.array(h, dtype=float, ndmin=2))
        self.h = h
        self._h = h
        self._n = h.shape[0]
        self._L = h.shape[1]
        self._hist = np.zeros(self._L)
        self._out_arr = np.zeros(self._n)
        self._out = self._out_arr

    def reset(self):
        self._hist[:] = 0.0
        self._out[:] = 0.0

    def step(self, double x):
        """Push ``x`` and return all N outputs (a reused buffer)."""
        _check(x)
        cdef Py_ssize_t i, j, L = self._L
        cdef double acc
        if L > 1:
            memmove(&self._hist[1], &self._hist[0], (L - 1) * sizeof(double))
        self._hist[0] = x
        for i in range(self._n):
            acc = 0.0
            for j in range(L):
                acc += self._h[i, j] * self._hist[j]
            self._out[i] = acc
        return self._out_arr


cdef class ShiftRegister:
    """Most-recent-first history written into a caller-supplied float64 view."""

    cdef public object values
    cdef double[::1] _v
    cdef Py_ssize_t _n

    def __init__(self, buf):
        self.values = buf
        self._v = buf
        self._n = buf.shape[0]

    cpdef push(self, double x):
        _check(x)
        if self._n > 1:
            memmove(&self._v[1], &self._v[0], (self._n - 1) * sizeof(double))
        if self._n:
            self._v[0] = x

    cpdef double dot(self, w):
        cdef double[::1] ww = w
        cdef Py_ssize_t i
        cdef double acc = 0.0
        if ww.shape[0] != self._n:
            raise ValueError(f"shapes ({self._n},) and ({ww.shape[0]},) not aligned")
        for i in range(self._n):
            acc += self._v[i] * ww[i]
        return acc

    def reset(self):
        self._v[:] = 0.0


cdef class RLS:
    """Exponentially weighted RLS core operating in place on ``theta`` and ``F``."""

    cdef public object theta
    cdef public object F
    cdef public double lam
    cdef public double trace_ceiling
    cdef public Py_ssize_t p
    cdef double[::1] _th
    cdef double[:, ::1] _F
    cdef double[::1] _fphi
    cdef double[::1] _th_new
    cdef double[:, ::1] _F_new

    def __init__(self, theta, F, lam, trace_ceiling):
        self.theta = theta
        self.F = F
        self.lam = float(lam)
        self.trace_ceiling = float(trace_ceiling)
        self.p = theta.size
        self._th = theta
        self._F = F
        self._fphi = np.zeros(self.p)
        self._th_new = np.zeros(self.p)
        self._F_new = np.zeros((self.p, self.p))

    cdef inline double[::1] _regressor(self, phi) except *:
        cdef double[::1] v = np.ascontiguousarray(phi, dtype=float)
        if v.shape[0] != self.p:
            raise DimensionError(f"regressor length {v.shape[0]} != {self.p}")
        return v

    cpdef double predict(self, phi) except? -1.0:
        cdef double[::1] v = self._regressor(phi)
        cdef Py_ssize_t i
        cdef double acc = 0.0
        for i in range(self.p):
            acc += self._th[i] * v[i]
        return acc

    cdef double _quad(self, double[::1] v):
        cdef Py_ssize_t i, j, p = self.p
        cdef double acc, q = 0.0
        for i in range(p):
            acc = 0.0
            for j in range(p):
                acc += self._F[i, j] * v[j]
            self._fphi[i] = acc
            q += v[i] * acc
        return q

    def normalize(self, double eps0, phi):
        cdef double[::1] v = self._regressor(phi)
        return self.lam * eps0 / (self.lam + self._quad(v))

    cpdef double update(self, phi, double eps0) except? -1.0:
        cdef double[::1] v = self._regressor(phi)
        cdef Py_ssize_t i, j, p = self.p
        cdef double lam = self.lam
        cdef double denom = lam + self._quad(v)
        cdef double eps = lam * eps0 / denom
        cdef double g = eps / lam
        cdef double tr = 0.0
        cdef double val
        cdef bint finite = isfinite(eps)
        for i in range(p):
            self._th_new[i] = self._th[i] + self._fphi[i] * g
            finite = finite and isfinite(self._th_new[i])
        for i in range(p):
            for j in range(i, p):
                val = 0.5 * ((self._F[i, j] - self._fphi[i] * self._fphi[j] / denom) / lam
                             + (self._F[j, i] - self._fphi[j] * self._fphi[i] / denom) / lam)
                self._F_new[i, j] = val
                self._F_new[j, i] = val
                finite = finite and isfinite(val)
            tr += self._F_new[i, i]
        if not finite:
            raise DivergenceError("RLS update produced non-finite values")
        if tr > self.trace_ceiling:
            raise DivergenceError(
                f"RLS gain trace {tr:.3g} exceeds ceiling {self.trace_ceiling:.3g}")
        memcpy(&self._th[0], &self._th_new[0], p * sizeof(double))
        memcpy(&self._F[0, 0], &self._F_new[0, 0], p * p * sizeof(double))
        return eps


cdef class DriftMonitor:
    """Windowed relative parameter drift ``|th(k)-th(k-W)| / max(|th(k)|, 1e-9)``.

    ``quiet`` counts consecutive samples whose drift stayed below ``delta``;
    samples without a full lag window count as violations.
    """

    cdef public Py_ssize_t window
    cdef public double delta
    cdef public Py_ssize_t count
    cdef public Py_ssize_t quiet
    cdef public double last_drift
    cdef double[:, ::1] _ring
    cdef Py_ssize_t _p

    def __init__(self, p, window, delta):
        self.window = int(window)
        self.delta = float(delta)
        self._p = int(p)
        self._ring = np.zeros((self.window + 1, self._p))
        self.count = 0
        self.quiet = 0
        self.last_drift = float("inf")

    def reset(self):
        self._ring[:, :] = 0.0
        self.count = 0
        self.quiet = 0
        self.last_drift = float("inf")

    def push(self, theta):
        cdef double[::1] th = np.ascontiguousarray(theta, dtype=float)
        cdef Py_ssize_t W = self.window, j, slot, old
        cdef double num = 0.0, den = 0.0, diff, d
        slot = self.count % (W + 1)
        for j in range(self._p):
            self._ring[slot, j] = th[j]
        self.count += 1
        if self.count <= W:
            self.quiet = 0
            return self.last_drift
        old = self.count % (W + 1)
        for j in range(self._p):
            diff = th[j] - self._ring[old, j]
            num += diff * diff
            den += th[j] * th[j]
        den = sqrt(den)
        if den < 1e-9:
            den = 1e-9
        d = sqrt(num) / den
        self.last_drift = d
        if d < self.delta:
            self.quiet += 1
        else:
            self.quiet = 0
        return d


def schur_stable(den):
    """Step-down (Schur-Cohn) test: True iff every root of the polynomial
    ``den`` (in ``z^-1``, ``den[0] != 0``) lies strictly inside the unit circle."""
    cdef double[::1] a = np.array(den, dtype=float)
    cdef double[::1] t = np.empty(a.shape[0], dtype=float)
    cdef Py_ssize_t m, j
    cdef double k, d
    for m in range(a.shape[0] - 1, 0, -1):
        if not isfinite(a[m]):
            return False
        k = a[m] / a[0]
        if fabs(k) >= 1.0:
            return False
        d = 1.0 - k * k
        for j in range(m):
            t[j] = (a[j] - k * a[m - j]) / d
        for j in range(m):
            a[j] = t[j]
    return True
