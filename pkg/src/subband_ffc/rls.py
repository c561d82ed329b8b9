"""Exponentially weighted recursive least squares.

One engine serves both the per-region plant identification and the
controller adaptation. With forgetting factor ``lam`` and a-priori error
``eps0 = y - theta' phi``::

    eps   = lam * eps0 / (lam + phi' F phi)
    theta = theta + F phi eps / lam
    F     = (F - F phi phi' F / (lam + phi' F phi)) / lam

The caller decides the sign of ``eps0``; see :mod:`subband_ffc.ffc`.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DimensionError, DivergenceError

DEFAULT_SIGMA = 1e4
DEFAULT_TRACE_CEILING = 1e12


@dataclass
class RlsSnapshot:
    theta: np.ndarray
    F_diag: np.ndarray
    lam: float
    steps: int

    def to_dict(self):
        return {"theta": self.theta.tolist(), "F_diag": self.F_diag.tolist(),
                "lambda": self.lam, "steps": self.steps}


class RlsState:
    """Parameter estimate ``theta``, gain matrix ``F`` and forgetting factor ``lam``.

    ``F`` starts at ``sigma * I``. ``theta`` and ``F`` are updated in place.
    """

    def __init__(self, p, lam=1.0, sigma=DEFAULT_SIGMA, theta0=None,
                 trace_ceiling=DEFAULT_TRACE_CEILING):
        if p < 1:
            raise ConfigurationError("RLS dimension must be >= 1")
        if not 0.0 < lam <= 1.0:
            raise ConfigurationError(f"forgetting factor must be in (0, 1], got {lam}")
        if not sigma > 0:
            raise ConfigurationError("initial gain sigma must be positive")
        self.p = int(p)
        self.lam = float(lam)
        self.sigma = float(sigma)
        self.theta = np.zeros(self.p)
        if theta0 is not None:
            theta0 = np.asarray(theta0, dtype=float)
            if theta0.shape != (self.p,):
                raise DimensionError(f"theta0 must have length {self.p}")
            self.theta[:] = theta0
        self.F = np.eye(self.p) * self.sigma
        self.steps = 0
        self._k = _kernels.RLS(self.theta, self.F, self.lam, trace_ceiling)

    def _phi(self, phi):
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.p,):
            raise DimensionError(f"regressor length {phi.size} != {self.p}")
        return np.ascontiguousarray(phi)

    def predict(self, phi):
        return self._k.predict(self._phi(phi))

    def gain_normalize(self, eps0, phi):
        return self._k.normalize(float(eps0), self._phi(phi))

    def update(self, phi, eps0):
        """One update; returns the normalised error. State is untouched on failure."""
        eps = self._k.update(self._phi(phi), float(eps0))
        self.steps += 1
        return eps

    def update_fast(self, phi, eps0):
        # phi must already be a contiguous float64 array of length p
        eps = self._k.update(phi, eps0)
        self.steps += 1
        return eps

    def reset_gain(self, sigma=None):
        self.F[:] = np.eye(self.p) * (self.sigma if sigma is None else sigma)

    def snapshot(self):
        return RlsSnapshot(self.theta.copy(), np.diag(self.F).copy(), self.lam, self.steps)

    def check_positive_definite(self):
        try:
            np.linalg.cholesky(self.F)
        except np.linalg.LinAlgError:
            return False
        return True


def predict(state, phi):
    return state.predict(phi)


def gain_normalize(state, eps0, phi):
    return state.gain_normalize(eps0, phi)


def update(state, phi, eps0):
    state.update(phi, eps0)
    return state


def batch_solution(Phi, y, lam=1.0, sigma=DEFAULT_SIGMA, theta0=None):
    """Exponentially weighted ridge solution that RLS reproduces exactly.

    Minimises ``sum_k lam^(K-k) (y_k - phi_k' th)^2 + lam^K (th - th0)' (I/sigma) (th - th0)``
    via the normal equations.
    """
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float)
    K, p = Phi.shape
    th0 = np.zeros(p) if theta0 is None else np.asarray(theta0, dtype=float)
    w = lam ** np.arange(K - 1, -1, -1, dtype=float)
    prior = lam ** K / sigma
    A = (Phi * w[:, None]).T @ Phi + prior * np.eye(p)
    rhs = (Phi * w[:, None]).T @ y + prior * th0
    return np.linalg.solve(A, rhs)


__all__ = ["RlsState", "RlsSnapshot", "predict", "gain_normalize", "update",
           "batch_solution", "DivergenceError"]
