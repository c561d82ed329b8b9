"""Per-region identification of a low-order plant model.

In region i the subband error obeys an ARX-like relation::

    e_i(k) = A*(q^-1) e_i(k) + B(q^-1) u_i(k) + M(q^-1) a_i(k) + residual

with ``A* = 1 - A``. The regressor stacks ``[e_i(k-1..k-nA), u_i(k-1..k-nB),
a_i(k..k-nM+1)]`` and RLS estimates ``[theta_A, theta_B, theta_M]``. The
identified plant model is ``Rhat = (theta_B q^-1 ...) / (1 - theta_A q^-1 ...)``.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .analysis import frf_compare
from .errors import ConfigurationError, DimensionError, NumericInputError
from .lti import TransferFunction
from .rls import RlsState


@dataclass(frozen=True)
class RegionOrders:
    n_A: int = 5
    n_B: int = 5
    n_M: int = 5

    def __post_init__(self):
        if min(self.n_A, self.n_B, self.n_M) < 1:
            raise ConfigurationError("all region orders must be >= 1")

    @property
    def p(self):
        return self.n_A + self.n_B + self.n_M

    def to_dict(self):
        return {"n_A": self.n_A, "n_B": self.n_B, "n_M": self.n_M}


class RegionRegressor:
    """Regressor ``phi_S = [phi_e; phi_u; phi_a]`` backed by one contiguous array."""

    def __init__(self, orders):
        self.orders = orders
        self.phi_S = np.zeros(orders.p)
        nA, nB = orders.n_A, orders.n_B
        self._e = _kernels.ShiftRegister(self.phi_S[:nA])
        self._u = _kernels.ShiftRegister(self.phi_S[nA:nA + nB])
        self._a = _kernels.ShiftRegister(self.phi_S[nA + nB:])

    @property
    def phi_e(self):
        return self.phi_S[:self.orders.n_A]

    @property
    def phi_u(self):
        o = self.orders
        return self.phi_S[o.n_A:o.n_A + o.n_B]

    @property
    def phi_a(self):
        o = self.orders
        return self.phi_S[o.n_A + o.n_B:]

    def push(self, e_prev, u_prev, a_now):
        """Shift in ``e_i(k-1)``, ``u_i(k-1)`` and ``a_i(k)`` to form ``phi_S(k)``."""
        if not (math.isfinite(e_prev) and math.isfinite(u_prev) and math.isfinite(a_now)):
            raise NumericInputError("non-finite sample pushed to regressor")
        self._e.push(e_prev)
        self._u.push(u_prev)
        self._a.push(a_now)
        return self

    def reset(self):
        self.phi_S[:] = 0.0


def push_sample(reg, e_i, u_i, a_i):
    return reg.push(e_i, u_i, a_i)


@dataclass
class RegionModel:
    theta_A: np.ndarray
    theta_B: np.ndarray
    theta_M: np.ndarray
    fs: float = 1.0

    @property
    def theta_S(self):
        return np.concatenate([self.theta_A, self.theta_B, self.theta_M])

    @property
    def Rhat(self):
        return TransferFunction(np.concatenate([[0.0], self.theta_B]),
                                np.concatenate([[1.0], -self.theta_A]), self.fs)

    @property
    def Mhat(self):
        return TransferFunction(self.theta_M, [1.0], self.fs)

    def to_dict(self):
        return {"theta_A": self.theta_A.tolist(), "theta_B": self.theta_B.tolist(),
                "theta_M": self.theta_M.tolist()}


def extract_model(theta_S, orders, fs=1.0):
    theta_S = np.asarray(theta_S, dtype=float)
    if theta_S.shape != (orders.p,):
        raise DimensionError(f"theta_S length {theta_S.size} != {orders.p}")
    nA, nB = orders.n_A, orders.n_B
    return RegionModel(theta_S[:nA].copy(), theta_S[nA:nA + nB].copy(),
                       theta_S[nA + nB:].copy(), fs)


def predict_error(model, reg):
    """A-priori estimate of ``e_i(k)`` from the current regressor."""
    theta = model.theta_S
    if theta.size != reg.phi_S.size:
        raise DimensionError("model and regressor orders differ")
    return float(theta @ reg.phi_S)


def step_identify(est, reg, e_i):
    """One RLS step on the current regressor; returns ``(eps0, eps)``."""
    eps0 = e_i - est.predict(reg.phi_S)
    eps = est.update(reg.phi_S, eps0)
    return eps0, eps


class Identifier:
    """Streaming identification pipeline for one region."""

    def __init__(self, orders, lam=1.0, sigma=1e4, fs=1.0, trace_ceiling=1e12):
        self.orders = orders
        self.fs = fs
        self.reg = RegionRegressor(orders)
        self.est = RlsState(orders.p, lam=lam, sigma=sigma, trace_ceiling=trace_ceiling)
        self._e_prev = 0.0
        self._u_prev = 0.0
        self.last_eps0 = 0.0
        self.last_eps = 0.0

    @property
    def theta(self):
        return self.est.theta

    @property
    def model(self):
        return extract_model(self.est.theta, self.orders, self.fs)

    def begin(self, a_i):
        """Form ``phi_S(k)`` once ``a_i(k)`` is known."""
        self.reg.push(self._e_prev, self._u_prev, a_i)

    def observe(self, e_i, u_i, update=True):
        """Consume ``e_i(k)``, ``u_i(k)``; update the estimate unless frozen."""
        if update:
            phi = self.reg.phi_S
            eps0 = e_i - self.est._k.predict(phi)
            self.last_eps = self.est.update_fast(phi, eps0)
            self.last_eps0 = eps0
        self._e_prev = e_i
        self._u_prev = u_i


def in_band_fit_report(model, true_plant, edges, fraction=0.8, n=64):
    """Max |magnitude| (dB) and |phase| (deg) error of ``model.Rhat`` over the
    central ``fraction`` of the band ``edges = (lo_hz, hi_hz)``.
    """
    rhat = model.Rhat if isinstance(model, RegionModel) else model
    return frf_compare(rhat, true_plant, edges, fraction=fraction, n=n)
