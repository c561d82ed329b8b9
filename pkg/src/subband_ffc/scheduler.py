"""Region-by-region identification and controller adaptation.

Per sample the scheduler
  1. splits ``a(k)`` into subbands,
  2. sums ``u_Qj(k)`` of every frozen region and the active one per actuator
     channel and adds band-limited excitation on the active region's channel,
  3. after the plant responds, splits ``e(k)`` and ``u(k)``,
  4. runs one identification and one controller update for the active region,
  5. freezes it once its parameters stop moving, then activates the next.
"""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from .errors import ConfigurationError, DivergenceError
from .ffc import ControllerState
from .filterbank import BankAnalyzer
from .lti import FilterState, TransferFunction, is_stable
from .sysid import Identifier

MAX_RETRIES = 3


class RegionPhase(Enum):
    PENDING = "pending"
    ACTIVE = "active"
    FROZEN = "frozen"


@dataclass(frozen=True)
class ConvergenceCriterion:
    window: int = 2000
    delta: float = 1e-4
    min_samples: int = 5000
    max_samples: int = 100000

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigurationError("convergence delta must be positive")
        if self.window < 1:
            raise ConfigurationError("convergence window must be >= 1")
        if self.min_samples > self.max_samples:
            raise ConfigurationError("min_samples must not exceed max_samples")

    def to_dict(self):
        return {"window": self.window, "delta": self.delta,
                "min_samples": self.min_samples, "max_samples": self.max_samples}

    @classmethod
    def from_dict(cls, d):
        base = cls()
        return cls(int(d.get("window", base.window)), float(d.get("delta", base.delta)),
                   int(d.get("min_samples", base.min_samples)),
                   int(d.get("max_samples", base.max_samples)))


def windowed_drift(history, window):
    """``|th(k) - th(k-W)| / max(|th(k)|, 1e-9)`` for every k >= W."""
    h = np.asarray(history, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] <= window:
        return np.zeros(0)
    num = np.linalg.norm(h[window:] - h[:-window], axis=1)
    den = np.maximum(np.linalg.norm(h[window:], axis=1), 1e-9)
    return num / den


def check_convergence(history, criterion, rhat=None):
    """Drift test on a θ history (rows = samples of the active region).

    True when at least ``min_samples`` rows exist, the drift stayed below
    ``delta`` for each of the last ``window`` samples, and ``rhat`` (if
    given) is stable. Budget exhaustion is handled by the caller.
    """
    h = np.asarray(history, dtype=float)
    W = criterion.window
    if h.shape[0] < max(criterion.min_samples, 2 * W):
        return False
    d = windowed_drift(h, W)[-W:]
    if not np.all(d < criterion.delta):
        return False
    return rhat is None or is_stable(rhat)


class RegionSlot:
    """Everything that belongs to one region."""

    def __init__(self, index, scenario, bank):
        from . import _kernels

        self.index = index
        self.channel = scenario.region_to_channel[index]
        orders = scenario.region_orders[index]
        self.ident = Identifier(orders, lam=scenario.lambda_S[index],
                                sigma=scenario.rls_sigma, fs=scenario.sample_rate_hz)
        self.ctl = ControllerState(scenario.controller_taps, lam=scenario.lambda_Q[index],
                                   sigma=scenario.controller_sigma, sign=scenario.update_sign)
        self.ctl.set_model_coeffs(np.zeros(orders.n_B + 1), np.r_[1.0, np.zeros(orders.n_A)])
        crit = scenario.convergence
        self.mon_S = _kernels.DriftMonitor(orders.p, crit.window, crit.delta)
        self.mon_Q = _kernels.DriftMonitor(scenario.controller_taps, crit.window, crit.delta)
        self.phase = RegionPhase.PENDING
        self.stage = "joint"
        self.samples = 0
        self.stage_samples = 0
        self.activated_at = None
        self.frozen_at = None
        self.reason = None
        self.retries = 0
        self.frozen_theta_S = None
        self.frozen_theta_Q = None

    @property
    def rhat(self):
        return self.ident.model.Rhat

    def snapshot(self):
        m = self.ident.model
        return {
            "region": self.index,
            "channel": self.channel,
            "phase": self.phase.value,
            "activated_at": self.activated_at,
            "frozen_at": self.frozen_at,
            "reason": self.reason,
            "budget_exhausted": self.reason == "budget",
            "samples_active": self.samples,
            "retries": self.retries,
            "theta_S": self.ident.theta.tolist(),
            "theta_Q": self.ctl.theta_Q.tolist(),
            "model": m.to_dict(),
            "rhat": {"b": m.Rhat.b.tolist(), "a": m.Rhat.a.tolist()},
            "rhat_stable": is_stable(m.Rhat),
            "drift_S": self.mon_S.last_drift,
            "drift_Q": self.mon_Q.last_drift,
            "rejected_model_updates": self.ctl.rejected_updates,
        }


class Scheduler:
    """Frequency-separation scheduler over one scenario's regions."""

    def __init__(self, scenario, bank=None):
        self.scenario = scenario
        self.bank = bank if bank is not None else scenario.make_bank()
        if self.bank.num_regions != scenario.num_regions:
            raise ConfigurationError("bank and scenario disagree on the region count")
        if self.bank.fs != scenario.sample_rate_hz:
            raise ConfigurationError("bank and scenario sample rates differ")
        self.N = scenario.num_regions
        self.criterion = scenario.convergence
        self.regions = [RegionSlot(i, scenario, self.bank) for i in range(self.N)]
        self.order = list(scenario.region_order)
        self._a_an = BankAnalyzer(self.bank)
        self._e_an = BankAnalyzer(self.bank)
        self._u_an = [BankAnalyzer(self.bank) for _ in range(scenario.num_channels)]
        self.region_to_channel = list(scenario.region_to_channel)
        self.n_channels = scenario.num_channels
        self.fullband_error = scenario.error_signal == "fullband"
        self.sequential = scenario.mode == "sequential"
        self.retry = scenario.on_divergence == "retry"
        self.k = 0
        self.events = []
        self._frozen = []
        self._pos = 0
        self.active = None
        self.u = [0.0] * self.n_channels
        self.u_Q = [0.0] * self.N
        self.u_E = 0.0
        self._exc_amp = float(scenario.excitation_amplitude)
        self._exc_rng = np.random.default_rng(scenario.excitation_seed)
        self._exc_buf = []
        self._exc_j = 0
        self._exc_filter = None
        self._exc_scale = 0.0
        self._activate(self.order[0])

    # -- phase bookkeeping -------------------------------------------------

    @property
    def phases(self):
        return [r.phase for r in self.regions]

    @property
    def done(self):
        return self.active is None

    def _activate(self, i):
        slot = self.regions[i]
        slot.phase = RegionPhase.ACTIVE
        slot.activated_at = self.k
        slot.stage = "identify" if self.sequential else "joint"
        self.active = slot
        h = self.bank.coeffs[i]
        self._exc_filter = FilterState(TransferFunction(h, [1.0], self.bank.fs))
        self._exc_scale = self._exc_amp / math.sqrt(float(np.dot(h, h)))
        self.events.append({"k": self.k, "region": i, "event": "activated"})

    def _freeze(self, slot, reason):
        slot.phase = RegionPhase.FROZEN
        slot.frozen_at = self.k
        slot.reason = reason
        slot.frozen_theta_S = slot.ident.theta.copy()
        slot.frozen_theta_Q = slot.ctl.theta_Q.copy()
        self._frozen.append(slot)
        ev = {"k": self.k, "region": slot.index, "event": "frozen", "reason": reason}
        if reason == "budget":
            ev["flag"] = "budget_exhausted"
        self.events.append(ev)
        self._pos += 1
        if self._pos < self.N:
            self._activate(self.order[self._pos])
        else:
            self.active = None
            self._exc_filter = None
            self.events.append({"k": self.k, "region": None, "event": "all_frozen"})

    # -- excitation ----------------------------------------------------------

    def excitation(self):
        """``u_E(k)``: seeded white noise through the active analyser, scaled to
        the configured RMS; zero once every region is frozen."""
        if self._exc_filter is None or self._exc_amp == 0.0:
            return 0.0
        if self._exc_j >= len(self._exc_buf):
            self._exc_buf = self._exc_rng.standard_normal(8192).tolist()
            self._exc_j = 0
        w = self._exc_buf[self._exc_j]
        self._exc_j += 1
        return self._exc_scale * self._exc_filter.step(w)

    # -- per-sample steps ----------------------------------------------------

    def control(self, a_k):
        """Phase 1 of a sample: read ``a(k)``, return per-channel ``u(k)``."""
        a_sub = self._a_an.step(a_k)
        u = [0.0] * self.n_channels
        uQ = self.u_Q
        for slot in self._frozen:
            ctl = slot.ctl
            ctl.push_reference(a_sub[slot.index], False)
            q = ctl.control_output()
            uQ[slot.index] = q
            u[slot.channel] += q
        act = self.active
        uE = 0.0
        if act is not None:
            i = act.index
            ai = a_sub[i]
            act.ident.begin(ai)
            try:
                act.ctl.push_reference(ai, act.stage != "identify")
            except DivergenceError as exc:
                self._handle_divergence(act, exc)
            q = act.ctl.control_output()
            uQ[i] = q
            u[act.channel] += q
            uE = self.excitation()
            u[act.channel] += uE
        self.u_E = uE
        self.u = u
        return u

    def observe(self, e_k):
        """Phase 2 of a sample: read ``e(k)`` and adapt the active region."""
        e_sub = self._e_an.step(e_k)
        u_subs = [an.step(uc) for an, uc in zip(self._u_an, self.u)]
        act = self.active
        if act is not None:
            try:
                self._update_active(act, e_k, e_sub, u_subs)
            except DivergenceError as exc:
                self._handle_divergence(act, exc)
        self.k += 1

    def _update_active(self, act, e_k, e_sub, u_subs):
        i = act.index
        stage = act.stage
        act.samples += 1
        act.stage_samples += 1
        ident_on = stage in ("joint", "identify")
        adapt_on = stage in ("joint", "adapt")
        act.ident.observe(e_sub[i], u_subs[act.channel][i], update=ident_on)
        ctl = act.ctl
        if ident_on:
            th = act.ident.theta
            o = act.ident.orders
            ctl.update_model(th[:o.n_A], th[o.n_A:o.n_A + o.n_B])
            act.mon_S.push(th)
        if adapt_on:
            ctl.adapt(e_k if self.fullband_error else e_sub[i])
            act.mon_Q.push(ctl.theta_Q)
        self._check(act)

    def _check(self, act):
        crit = self.criterion
        W = crit.window
        if act.stage == "identify":
            if act.stage_samples >= crit.min_samples and act.mon_S.quiet >= W \
                    and is_stable(act.rhat):
                act.stage = "adapt"
                act.stage_samples = 0
                self.events.append({"k": self.k, "region": act.index,
                                    "event": "model_fixed"})
            elif act.samples >= crit.max_samples:
                self._freeze(act, "budget")
            return
        converged = (act.stage_samples >= crit.min_samples and act.mon_Q.quiet >= W
                     and (act.stage == "adapt" or act.mon_S.quiet >= W))
        if converged and is_stable(act.rhat):
            self._freeze(act, "converged")
        elif act.samples >= crit.max_samples:
            self._freeze(act, "budget")

    def _handle_divergence(self, act, exc):
        self.events.append({"k": self.k, "region": act.index, "event": "diverged",
                            "message": str(exc)})
        if not self.retry or act.retries >= MAX_RETRIES:
            raise DivergenceError(
                f"region {act.index} diverged at sample {self.k}: {exc}",
                region=act.index) from exc
        act.retries += 1
        act.ident.est.reset_gain()
        act.ctl.rls.reset_gain()
        act.ctl.reset_histories()

    def step(self, a_k, read_error):
        """Full sample: ``u = control(a_k)``, ``e = read_error(u)``, ``observe(e)``."""
        u = self.control(a_k)
        e = read_error(u)
        self.observe(e)
        return u

    def snapshots(self):
        return [r.snapshot() for r in self.regions]

    def run(self, total_samples, plant=None):
        return run(self, self.scenario, total_samples, plant=plant)


def step(sched, a_k, read_error):
    return sched.step(a_k, read_error)


def excitation(sched):
    return sched.excitation()


def run(sched, scenario, total_samples, plant=None):
    """Closed-loop execution for ``total_samples``; returns a SimulationTrace."""
    from .plantsim import PlantSim, SimulationTrace

    if sched.bank.fs != scenario.sample_rate_hz:
        raise ConfigurationError("scheduler and scenario sample rates differ")
    K = int(total_samples)
    plant = plant if plant is not None else PlantSim(scenario)
    C, N = scenario.num_channels, scenario.num_regions
    e = np.empty(K)
    u = np.empty((C, K))
    uE = np.empty(K)
    uQ = np.zeros((N, K))
    act = np.empty(K, dtype=int)
    uQ_rows = [uQ[j] for j in range(N)]
    u_rows = [u[c] for c in range(C)]
    sense, pstep = plant.sense, plant.step
    control, observe = sched.control, sched.observe
    for k in range(K):
        a_k = sense()
        uk = control(a_k)
        ek = pstep(uk)
        act[k] = -1 if sched.active is None else sched.active.index
        observe(ek)
        e[k] = ek
        for c in range(C):
            u_rows[c][k] = uk[c]
        uE[k] = sched.u_E
        for j in range(N):
            uQ_rows[j][k] = sched.u_Q[j]
    ex = plant.exogenous(K)
    return SimulationTrace(ex["v"], ex["a"], ex["n"], ex["v_b"], e, u, uE, uQ, act,
                           events=list(sched.events),
                           snapshots={"regions": sched.snapshots()},
                           sample_rate_hz=scenario.sample_rate_hz)
