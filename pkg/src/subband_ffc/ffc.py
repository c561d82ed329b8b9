"""Per-region filtered-reference FIR feedforward controller.

Region i produces ``u_Qi(k) = theta_Q(k-1)' [a_i(k) .. a_i(k-n_w+1)]`` and
adapts ``theta_Q`` by RLS on the filtered reference ``x_i = Rhat_i a_i``.

Sign convention: with ``e = R u + v_b + n`` the squared error is minimised by
feeding RLS the innovation ``-e(k)`` ("descent", the default). ``sign="ascent"``
feeds ``+e(k)`` instead, which walks away from the minimiser; it is kept only
so that variant stays runnable.
"""

import math

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DivergenceError
from .rls import RlsState

SIGNS = {"descent": -1.0, "ascent": 1.0}


class ControllerState:
    """FIR controller of ``n_w`` taps with its RLS adaptor and reference filter.

    The reference filter ``Rhat`` is realised in direct form I over explicit
    histories so its coefficients may change from one sample to the next
    while the region is still identifying.
    """

    def __init__(self, n_w, lam=1.0, sigma=1e4, sign="descent", rhat=None,
                 trace_ceiling=1e12):
        if n_w < 1:
            raise ConfigurationError("controller needs at least one tap")
        if sign not in SIGNS:
            raise ConfigurationError(f"unknown update sign {sign!r}")
        self.n_w = int(n_w)
        self.sign = sign
        self._sgn = SIGNS[sign]
        self.rls = RlsState(self.n_w, lam=lam, sigma=sigma, trace_ceiling=trace_ceiling)
        self.phi_a_buf = np.zeros(self.n_w)
        self.phi_x_buf = np.zeros(self.n_w)
        self._phi_a = _kernels.ShiftRegister(self.phi_a_buf)
        self._phi_x = _kernels.ShiftRegister(self.phi_x_buf)
        self.last_x = 0.0
        self.rejected_updates = 0
        if rhat is None:
            self.set_model_coeffs([1.0], [1.0])
        else:
            self.set_model(rhat)

    @property
    def theta_Q(self):
        return self.rls.theta

    @property
    def phi_a(self):
        return self.phi_a_buf

    @property
    def phi_x(self):
        return self.phi_x_buf

    def set_model(self, tf):
        self.set_model_coeffs(tf.b, tf.a)

    def set_model_coeffs(self, b, a):
        """Install ``Rhat = b / a`` (``a[0]`` normalised); histories restart at zero."""
        b = np.asarray(b, dtype=float)
        a = np.asarray(a, dtype=float)
        self._b = b / a[0]
        self._f = -a[1:] / a[0]
        self._a_hist_buf = np.zeros(self._b.size)
        self._x_hist_buf = np.zeros(self._f.size)
        self._a_hist = _kernels.ShiftRegister(self._a_hist_buf)
        self._x_hist = _kernels.ShiftRegister(self._x_hist_buf)
        self._den_buf = np.ones(self._f.size + 1)

    def update_model(self, theta_A, theta_B, require_stable=True):
        """Refresh ``Rhat = theta_B q^-1.. / (1 - theta_A q^-1..)`` in place, keeping histories.

        With ``require_stable`` an estimate whose denominator is not strictly
        stable is skipped and the previous coefficients stay in use; the
        return value says whether the refresh happened.
        """
        if require_stable:
            self._den_buf[1:] = theta_A
            self._den_buf[1:] *= -1.0
            if not _kernels.schur_stable(self._den_buf):
                self.rejected_updates += 1
                return False
        self._b[1:] = theta_B
        self._f[:] = theta_A
        return True

    def filtered_reference(self, a_i):
        """Shift ``a_i(k)`` in, compute ``x_i(k)`` and shift it into ``phi_x``."""
        self._a_hist.push(a_i)
        x = self._a_hist.dot(self._b) + self._x_hist.dot(self._f)
        if not math.isfinite(x):
            raise DivergenceError("filtered reference became non-finite")
        self._x_hist.push(x)
        self._phi_x.push(x)
        self.last_x = x
        return x

    def push_reference(self, a_i, filtered=True):
        self._phi_a.push(a_i)
        if filtered:
            return self.filtered_reference(a_i)
        return None

    def control_output(self):
        """``u_Qi(k)`` from the pre-update parameters."""
        return self._phi_a.dot(self.rls.theta)

    def adapt(self, e):
        """RLS step on ``phi_x`` with innovation ``sign * e``."""
        return self.rls.update_fast(self.phi_x_buf, self._sgn * e)

    def reset_histories(self):
        for reg in (self._phi_a, self._phi_x, self._a_hist, self._x_hist):
            reg.reset()


def filtered_reference(ctl, a_i):
    return ctl.filtered_reference(a_i)


def control_output(ctl):
    return ctl.control_output()


def adapt(ctl, e):
    ctl.adapt(e)
    return ctl


def total_control(active_controls):
    """``u_A(k)``: plain sum of the contributing regional outputs."""
    return float(sum(active_controls))
