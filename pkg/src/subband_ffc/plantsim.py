"""Closed-loop simulation environment.

Signal topology (per sample k)::

    a(k)   = S_D v(k)                       reference measurement
    v_b(k) = P v(k)                         vibration at the output
    e(k)   = sum_c R_c u_c(k) + v_b(k) + n(k)

``v`` and ``n`` are seeded Gaussian sequences (optionally shaped). They do not
depend on the control, so they are generated in blocks ahead of the loop;
only the plant responses ``R_c u_c`` are stepped sample by sample.
"""

from dataclasses import dataclass, field, replace
import csv
import io
import json
import math

import numpy as np

from .errors import ConfigurationError, NumericInputError
from .filterbank import BankSpec, analyze, bank_from_coeffs, design_bank, identity_bank
from .lti import (FilterState, TransferFunction, cascade, delay_sos, filter_signal,
                  freq_response, is_stable)
from .scheduler import ConvergenceCriterion
from .sysid import Identifier, RegionOrders

DEFAULT_FS = 41760.0
CHUNK = 8192


@dataclass
class SignalSpec:
    """Gaussian source: ``level`` is the std of the white driver, ``shaping``
    an optional colouring filter applied after scaling."""

    level: float = 1.0
    seed: int = 0
    shaping: TransferFunction = None

    def to_dict(self):
        return {"level": self.level, "seed": self.seed,
                "shaping": None if self.shaping is None else self.shaping.to_dict()}

    @classmethod
    def from_dict(cls, d):
        sh = d.get("shaping")
        return cls(float(d.get("level", 1.0)), int(d.get("seed", 0)),
                   None if sh is None else TransferFunction.from_dict(sh))


@dataclass
class Scenario:
    name: str
    sample_rate_hz: float
    plants: list
    primary_path: TransferFunction
    sensor_path: TransferFunction
    disturbance: SignalSpec = field(default_factory=SignalSpec)
    noise: SignalSpec = field(default_factory=lambda: SignalSpec(0.0, 1))
    num_regions: int = 4
    bank_taps: int = 64
    bank_atten_db: float = 110.0
    region_orders: list = None
    controller_order: int = 3
    lambda_S: list = None
    lambda_Q: list = None
    rls_sigma: float = 1e4
    controller_sigma: float = None
    convergence: ConvergenceCriterion = field(default_factory=ConvergenceCriterion)
    excitation_amplitude: float = 0.1
    excitation_seed: int = 2
    region_to_channel: list = None
    region_order: list = None
    mode: str = "simultaneous"
    update_sign: str = "descent"
    error_signal: str = "fullband"
    on_divergence: str = "halt"
    bank_coeffs: np.ndarray = None

    def __post_init__(self):
        N = self.num_regions
        if N < 1:
            raise ConfigurationError("num_regions must be >= 1")
        if self.region_orders is None:
            self.region_orders = [RegionOrders() for _ in range(N)]
        elif isinstance(self.region_orders, RegionOrders):
            self.region_orders = [self.region_orders] * N
        for name in ("lambda_S", "lambda_Q"):
            val = getattr(self, name)
            if val is None:
                val = 1.0
            if np.isscalar(val):
                val = [float(val)] * N
            setattr(self, name, [float(x) for x in val])
        if self.controller_sigma is None:
            self.controller_sigma = self.rls_sigma
        if self.region_to_channel is None:
            self.region_to_channel = [0] * N
        if self.region_order is None:
            self.region_order = list(range(N))
        self.validate()

    @property
    def num_channels(self):
        return len(self.plants)

    @property
    def controller_taps(self):
        return self.controller_order + 1

    def validate(self):
        fs = self.sample_rate_hz
        tfs = list(self.plants) + [self.primary_path, self.sensor_path]
        for extra in (self.disturbance.shaping, self.noise.shaping):
            if extra is not None:
                tfs.append(extra)
        for tf in tfs:
            if tf.fs != fs:
                raise ConfigurationError(
                    f"sample-rate mismatch: {tf.fs:g} Hz vs scenario {fs:g} Hz")
        for c, tf in enumerate(self.plants):
            if not is_stable(tf):
                raise ConfigurationError(f"plant channel {c} is not stable")
        for name, tf in (("primary path", self.primary_path),
                         ("sensor path", self.sensor_path)):
            if not is_stable(tf):
                raise ConfigurationError(f"{name} is not stable")
        N = self.num_regions
        if len(self.region_orders) != N or len(self.lambda_S) != N or len(self.lambda_Q) != N:
            raise ConfigurationError("per-region settings must have num_regions entries")
        if len(self.region_to_channel) != N:
            raise ConfigurationError("region_to_channel must map every region")
        if any(not 0 <= c < self.num_channels for c in self.region_to_channel):
            raise ConfigurationError("region_to_channel names a missing actuator channel")
        if sorted(self.region_order) != list(range(N)):
            raise ConfigurationError("region_order must be a permutation of 0..N-1")
        if self.mode not in ("simultaneous", "sequential"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.error_signal not in ("fullband", "subband"):
            raise ConfigurationError(f"unknown error_signal {self.error_signal!r}")
        if self.on_divergence not in ("halt", "retry"):
            raise ConfigurationError(f"unknown on_divergence {self.on_divergence!r}")
        if self.controller_order < 0:
            raise ConfigurationError("controller_order must be >= 0")
        if not (self.rls_sigma > 0 and self.controller_sigma > 0):
            raise ConfigurationError("initial RLS gains must be positive")
        if self.bank_coeffs is not None:
            self.bank_coeffs = np.array(self.bank_coeffs, dtype=float, ndmin=2)
            if self.bank_coeffs.shape != (N, self.bank_taps):
                raise ConfigurationError(
                    f"bank coefficients must be {N} x {self.bank_taps}, "
                    f"got {self.bank_coeffs.shape[0]} x {self.bank_coeffs.shape[1]}")

    def make_bank(self):
        """The analysis bank: stored coefficients when present, else a fresh design."""
        if self.num_regions == 1:
            return identity_bank(self.sample_rate_hz)
        spec = BankSpec(self.num_regions, self.bank_taps, self.bank_atten_db,
                        self.sample_rate_hz)
        if self.bank_coeffs is not None:
            return bank_from_coeffs(spec, self.bank_coeffs)
        return design_bank(spec, strict=False)

    def plant_for_region(self, i):
        return self.plants[self.region_to_channel[i]]

    def with_seed(self, seed):
        """Copy with disturbance/noise/excitation seeds derived from one integer."""
        return replace(self,
                       disturbance=replace(self.disturbance, seed=int(seed)),
                       noise=replace(self.noise, seed=int(seed) + 1),
                       excitation_seed=int(seed) + 2)

    def to_dict(self):
        return {
            "name": self.name,
            "sample_rate_hz": self.sample_rate_hz,
            "plants": [p.to_dict() for p in self.plants],
            "primary_path": self.primary_path.to_dict(),
            "sensor_path": self.sensor_path.to_dict(),
            "disturbance": self.disturbance.to_dict(),
            "noise": self.noise.to_dict(),
            "bank": {"num_regions": self.num_regions, "num_taps": self.bank_taps,
                     "stopband_atten_db": self.bank_atten_db,
                     "coeffs": (None if self.bank_coeffs is None
                                else self.bank_coeffs.tolist())},
            "region_orders": [o.to_dict() for o in self.region_orders],
            "controller_order": self.controller_order,
            "lambda_S": self.lambda_S,
            "lambda_Q": self.lambda_Q,
            "rls_sigma": self.rls_sigma,
            "controller_sigma": self.controller_sigma,
            "convergence": self.convergence.to_dict(),
            "excitation": {"amplitude": self.excitation_amplitude,
                           "seed": self.excitation_seed},
            "region_to_channel": self.region_to_channel,
            "region_order": self.region_order,
            "mode": self.mode,
            "update_sign": self.update_sign,
            "error_signal": self.error_signal,
            "on_divergence": self.on_divergence,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            bank = d.get("bank", {})
            exc = d.get("excitation", {})
            orders = d.get("region_orders")
            if isinstance(orders, dict):
                orders = RegionOrders(**orders)
            elif orders is not None:
                orders = [RegionOrders(**o) for o in orders]
            return cls(
                name=d.get("name", "custom"),
                sample_rate_hz=float(d["sample_rate_hz"]),
                plants=[TransferFunction.from_dict(p) for p in d["plants"]],
                primary_path=TransferFunction.from_dict(d["primary_path"]),
                sensor_path=TransferFunction.from_dict(d["sensor_path"]),
                disturbance=SignalSpec.from_dict(d.get("disturbance", {})),
                noise=SignalSpec.from_dict(d.get("noise", {"level": 0.0, "seed": 1})),
                num_regions=int(bank.get("num_regions", 4)),
                bank_taps=int(bank.get("num_taps", 64)),
                bank_atten_db=float(bank.get("stopband_atten_db") or 110.0),
                region_orders=orders,
                controller_order=int(d.get("controller_order", 3)),
                lambda_S=d.get("lambda_S"),
                lambda_Q=d.get("lambda_Q"),
                rls_sigma=float(d.get("rls_sigma", 1e4)),
                controller_sigma=(None if d.get("controller_sigma") is None
                                  else float(d["controller_sigma"])),
                convergence=ConvergenceCriterion.from_dict(d.get("convergence", {})),
                excitation_amplitude=float(exc.get("amplitude", 0.1)),
                excitation_seed=int(exc.get("seed", 2)),
                region_to_channel=d.get("region_to_channel"),
                region_order=d.get("region_order"),
                mode=d.get("mode", "simultaneous"),
                update_sign=d.get("update_sign", "descent"),
                error_signal=d.get("error_signal", "fullband"),
                on_divergence=d.get("on_divergence", "halt"),
                bank_coeffs=bank.get("coeffs"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"bad scenario config: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario is not valid JSON: {exc}") from exc


class _Source:
    """Block generator of a seeded (optionally shaped) Gaussian sequence."""

    def __init__(self, spec):
        self.level = float(spec.level)
        self.rng = np.random.default_rng(spec.seed)
        self.shaper = None if spec.shaping is None else FilterState(spec.shaping)

    def block(self, n):
        if self.level == 0.0:
            return np.zeros(n)
        w = self.level * self.rng.standard_normal(n)
        return w if self.shaper is None else self.shaper.run(w)


class PlantSim:
    """Sample-by-sample realisation of one scenario (single owner)."""

    def __init__(self, scenario, chunk=CHUNK):
        self.scenario = scenario
        self.chunk = int(chunk)
        self._vsrc = _Source(scenario.disturbance)
        self._nsrc = _Source(scenario.noise)
        self._sd = FilterState(scenario.sensor_path)
        self._p = FilterState(scenario.primary_path)
        self._r = [FilterState(tf) for tf in scenario.plants]
        self.k = 0
        self._base = 0
        self._blocks = {"v": [], "a": [], "n": [], "v_b": []}
        self._cur = None
        self._refill()

    def _refill(self):
        v = self._vsrc.block(self.chunk)
        n = self._nsrc.block(self.chunk)
        a = self._sd.run(v)
        vb = self._p.run(v)
        for name, arr in (("v", v), ("a", a), ("n", n), ("v_b", vb)):
            self._blocks[name].append(arr)
        self._a_list = a.tolist()
        self._vb_list = vb.tolist()
        self._n_list = n.tolist()
        self._base = self.k

    def sense(self):
        """``a(k)`` for the current sample."""
        j = self.k - self._base
        if j >= self.chunk:
            self._refill()
            j = 0
        return self._a_list[j]

    def step(self, u):
        """Apply per-channel controls ``u`` at sample k; return ``e(k)`` and advance."""
        j = self.k - self._base
        if j >= self.chunk:
            self._refill()
            j = 0
        y = 0.0
        for c, r in enumerate(self._r):
            uc = u[c]
            if not math.isfinite(uc):
                raise NumericInputError(f"non-finite control on channel {c}")
            y += r.step(uc)
        e = y + self._vb_list[j] + self._n_list[j]
        self.k += 1
        return e

    def exogenous(self, samples):
        """The generated ``v, a, n, v_b`` streams truncated to ``samples``."""
        return {name: np.concatenate(blocks)[:samples] if blocks else np.zeros(0)
                for name, blocks in self._blocks.items()}


def step_plant(state, u, k):
    """Return ``(e(k), a(k))`` for controls ``u`` applied at sample ``k``."""
    if k != state.k:
        raise ConfigurationError(f"plant is at sample {state.k}, not {k}")
    a = state.sense()
    e = state.step(u)
    return e, a


@dataclass
class SimulationTrace:
    """Per-sample record of one run plus events and final parameter snapshots."""

    v: np.ndarray
    a: np.ndarray
    n: np.ndarray
    v_b: np.ndarray
    e: np.ndarray
    u: np.ndarray          # (channels, K)
    u_E: np.ndarray
    u_Q: np.ndarray        # (regions, K)
    active_region: np.ndarray
    events: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    sample_rate_hz: float = DEFAULT_FS

    def __len__(self):
        return self.e.size

    def columns(self):
        cols = [("k", np.arange(self.e.size)), ("v", self.v), ("a", self.a),
                ("n", self.n), ("v_b", self.v_b), ("e", self.e)]
        for c in range(self.u.shape[0]):
            cols.append((f"u_ch{c}", self.u[c]))
        cols.append(("u_E", self.u_E))
        for i in range(self.u_Q.shape[0]):
            cols.append((f"u_Q{i}", self.u_Q[i]))
        cols.append(("active_region", self.active_region))
        return cols

    def to_csv(self, path_or_buf):
        cols = self.columns()
        names = [c[0] for c in cols]
        ints = {"k", "active_region"}
        data = [c[1].tolist() for c in cols]
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        f = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            f.write(",".join(names) + "\n")
            fmts = [("%d" if n in ints else "%.17g") for n in names]
            line = ",".join(fmts) + "\n"
            for row in zip(*data):
                f.write(line % row)
        finally:
            if own:
                f.close()

    @classmethod
    def from_csv(cls, path, sample_rate_hz=DEFAULT_FS):
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = np.array([[float(x) for x in r] for r in reader], dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(header))
        col = {name: rows[:, j] for j, name in enumerate(header)}
        required = {"k", "v", "a", "n", "v_b", "e", "u_E", "active_region"}
        missing = required - set(col)
        if missing:
            raise ConfigurationError(f"trace is missing columns {sorted(missing)}")
        u = np.array([col[n] for n in header if n.startswith("u_ch")])
        uq = np.array([col[n] for n in header if n.startswith("u_Q")])
        return cls(col["v"], col["a"], col["n"], col["v_b"], col["e"], u, col["u_E"],
                   uq, col["active_region"].astype(int), sample_rate_hz=sample_rate_hz)

    def csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def run_open_loop(scenario, samples):
    """Uncontrolled baseline: ``u = 0`` on every channel."""
    plant = PlantSim(scenario)
    while plant._base + plant.chunk < samples:
        plant.k = plant._base + plant.chunk
        plant._refill()
    ex = plant.exogenous(samples)
    e = ex["v_b"] + ex["n"]
    return SimulationTrace(ex["v"], ex["a"], ex["n"], ex["v_b"], e,
                           np.zeros((scenario.num_channels, samples)), np.zeros(samples),
                           np.zeros((scenario.num_regions, samples)),
                           np.full(samples, -1, dtype=int),
                           sample_rate_hz=scenario.sample_rate_hz)


def drive(scenario, u):
    """Open-loop run with a prescribed ``(channels, K)`` control sequence."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    plant = PlantSim(scenario)
    K = u.shape[1]
    e = np.empty(K)
    a = np.empty(K)
    for k in range(K):
        a[k] = plant.sense()
        e[k] = plant.step(u[:, k])
    return e, a


# -- synthetic scenarios ------------------------------------------------------

DIFFICULTIES = ("smoke", "desk", "full")
FULL_PLANT_SEED = 20240611


def _resonance(freq_hz, radius, fs):
    """Monic quadratic with roots at ``radius * exp(+-j 2 pi f / fs)``."""
    theta = 2.0 * math.pi * freq_hz / fs
    return [1.0, -2.0 * radius * math.cos(theta), radius * radius]


def _section(zero, pole, fs):
    """SOS row from ``(freq_hz, radius)`` pairs for the zeros and the poles."""
    return _resonance(*zero, fs) + _resonance(*pole, fs)


def _rms_normalised(rows, fs, grid=1024):
    """SOS array scaled so the RMS gain over ``[0, fs/2]`` equals one."""
    sos = np.array(rows, dtype=float, ndmin=2)
    tf = TransferFunction.from_sos(sos, fs)
    g = math.sqrt(float(np.mean(np.abs(freq_response(tf, np.linspace(0.0, fs / 2.0, grid))) ** 2)))
    sos[0, :3] /= g
    return sos


def _rms_gain(tf, grid=8192):
    f = np.linspace(0.0, tf.fs / 2.0, grid)
    return math.sqrt(float(np.mean(np.abs(freq_response(tf, f)) ** 2)))


def _band_resonances(fs, num_regions, radius, offsets):
    """Disturbance colouring: one resonance per band, at the centre plus an
    offset given in band widths."""
    bw = fs / 2.0 / num_regions
    rows = [[1.0, 0.0, 0.0] + _resonance((i + 0.5) * bw + off * bw, radius, fs)
            for i, off in enumerate(offsets)]
    return TransferFunction.from_sos(_rms_normalised(rows, fs), fs)


def _random_sections(rng, count, fs, pole_radius=(0.4, 0.85), zero_radius=(0.3, 0.85)):
    """Random stable sections, each pairing a resonance with a nearby
    anti-resonance so the cascade stays roughly flat on average."""
    rows = []
    for _ in range(count):
        fp = rng.uniform(0.03, 0.97) * fs / 2.0
        fz = min(max(fp * rng.uniform(0.8, 1.25), 0.01 * fs), 0.49 * fs)
        rows.append(_section((fz, rng.uniform(*zero_radius)),
                             (fp, rng.uniform(*pole_radius)), fs))
    return rows


def _first_order(rng, radius=(0.2, 0.8)):
    return [1.0, -rng.uniform(*radius), 0.0, 1.0, -rng.uniform(*radius), 0.0]


def _smoke_paths(fs):
    r_rows = [[0.0, 1.0, -0.3] + _resonance(3000.0, 0.8, fs),
              _section((9000.0, 0.5), (14000.0, 0.7), fs)]
    sd_rows = [_section((4000.0, 0.5), (2000.0, 0.6), fs),
               _section((16000.0, 0.5), (11000.0, 0.6), fs)]
    g_rows = [_section((12000.0, 0.5), (6000.0, 0.6), fs)]
    return r_rows, sd_rows, g_rows, 35


def _desk_paths(fs, nmp_zero=3.88):
    rr, zr = 0.71, 0.43
    poles = [4400.0, 8300.0, 11800.0, 15200.0, 18600.0]
    zeros = [2800.0, 6400.0, 10000.0, 13500.0, 17000.0]
    r_rows = [[0.0, 1.0, -nmp_zero] + _resonance(1200.0, rr, fs)]
    r_rows += [_section((z, zr), (p, rr), fs) for z, p in zip(zeros, poles)]
    sd_poles = [1800.0, 6000.0, 10400.0, 14800.0, 19200.0]
    sd_zeros = [3900.0, 8200.0, 12600.0, 17000.0, 600.0]
    sd_rows = [_section((z, 0.5), (p, 0.6), fs) for z, p in zip(sd_zeros, sd_poles)]
    g_rows = [_section((z, 0.5), (p, 0.52), fs)
              for z, p in zip([6200.0, 13300.0, 20000.0], [2600.0, 9800.0, 16800.0])]
    return r_rows, sd_rows, g_rows, 35


def _full_paths(fs):
    rng = np.random.default_rng(FULL_PLANT_SEED)
    r_v = [[0.0, 1.0, -0.4] + _resonance(800.0, 0.8, fs)] + _random_sections(rng, 24, fs)
    r_m = ([[0.0, 1.0, -0.2] + _resonance(15000.0, 0.7, fs)] + _random_sections(rng, 7, fs)
           + [_first_order(rng)])
    sd_rows = _random_sections(rng, 50, fs)
    g_rows = _random_sections(rng, 12, fs) + [_first_order(rng)]
    return [r_v, r_m], sd_rows, g_rows, 35


def make_synthetic_scenario(seed=0, difficulty="desk", measurement_noise_db=None):
    """Deterministic synthetic scenario.

    The plants depend only on ``difficulty``; ``seed`` selects the disturbance,
    noise and excitation realisations. ``measurement_noise_db`` adds white
    measurement noise that many dB below the RMS of the uncontrolled error.

    * ``smoke``: small SISO problem (R order 4, P order 6, S_D order 4) with a
      short convergence budget, for quick end-to-end runs.
    * ``desk``: SISO with R order 12 including one zero outside the unit
      circle, P order 16 and S_D order 10, coloured disturbance.
    * ``full``: dual-channel plant (orders 50 and 17), P order 125 and S_D
      order 100 from random stable sections; regions 0-1 drive channel 0 and
      regions 2-3 drive channel 1.
    """
    if difficulty not in DIFFICULTIES:
        raise ConfigurationError(
            f"difficulty must be one of {', '.join(DIFFICULTIES)}, got {difficulty!r}")
    fs = DEFAULT_FS
    extra = {}
    if difficulty == "smoke":
        r_rows, sd_rows, g_rows, delay = _smoke_paths(fs)
        plant_rows = [r_rows]
        shaping = _band_resonances(fs, 4, 0.95, [0.0, 0.0, 0.0, 0.0])
        extra = dict(convergence=ConvergenceCriterion(window=500, delta=0.5,
                                                      min_samples=3000, max_samples=5000),
                     region_orders=RegionOrders(5, 5, 45), lambda_Q=0.9998,
                     controller_sigma=1.0)
    elif difficulty == "desk":
        r_rows, sd_rows, g_rows, delay = _desk_paths(fs)
        plant_rows = [r_rows]
        shaping = _band_resonances(fs, 4, 0.985, [-0.108, 0.099, 0.07, 0.14])
        extra = dict(convergence=ConvergenceCriterion(window=2000, delta=0.5,
                                                      min_samples=40000, max_samples=50000),
                     region_orders=RegionOrders(5, 5, 45), lambda_Q=0.9998,
                     controller_sigma=1.0, region_order=[2, 1, 3, 0])
    else:
        plant_rows, sd_rows, g_rows, delay = _full_paths(fs)
        shaping = _band_resonances(fs, 4, 0.95, [0.0, 0.0, 0.0, 0.0])
        extra = dict(convergence=ConvergenceCriterion(window=2000, delta=0.5,
                                                      min_samples=10000, max_samples=15000),
                     region_orders=RegionOrders(5, 5, 45), lambda_Q=0.9998,
                     controller_sigma=1.0, region_to_channel=[0, 0, 1, 1])
    plants = [TransferFunction.from_sos(_rms_normalised(rows, fs), fs) for rows in plant_rows]
    sd_sos = _rms_normalised(sd_rows, fs)
    g_sos = _rms_normalised(g_rows, fs)
    sensor = TransferFunction.from_sos(sd_sos, fs)
    primary = TransferFunction.from_sos(
        np.vstack([sd_sos, g_sos, delay_sos(delay)]), fs)
    scenario = Scenario(difficulty, fs, plants, primary, sensor,
                        disturbance=SignalSpec(1.0, 0, shaping), **extra)
    scenario = scenario.with_seed(seed)
    if measurement_noise_db is not None:
        scenario = with_measurement_noise(scenario, measurement_noise_db)
    return scenario


def with_measurement_noise(scenario, db_below):
    """Copy with white noise ``db_below`` dB under the RMS of ``v_b = P v``."""
    path = scenario.primary_path
    if scenario.disturbance.shaping is not None:
        path = cascade(scenario.disturbance.shaping, path)
    level = scenario.disturbance.level * _rms_gain(path) * 10.0 ** (-float(db_below) / 20.0)
    return replace(scenario, noise=replace(scenario.noise, level=level))


def make_fullband_scenario(seed=0):
    """Single-region (N = 1) low-order SISO scenario whose optimal controller
    is an exact 4-tap FIR.

    ``R = b q^-1 / A_R`` (A_R of order 2) and ``P = S_D (g0 + g1 q^-1) q^-1``
    give ``-P / (S_D R) = -(g0 + g1 q^-1) A_R / b``.
    """
    fs = DEFAULT_FS
    a_r = _resonance(5000.0, 0.7, fs)
    plant = TransferFunction([0.0, 0.8], a_r, fs)
    sensor = TransferFunction.from_sos(
        _rms_normalised([_section((9000.0, 0.5), (3000.0, 0.6), fs),
                         _section((17000.0, 0.4), (12000.0, 0.5), fs)], fs), fs)
    primary = cascade(sensor, TransferFunction([0.0, 0.9, -0.4], [1.0], fs))
    scenario = Scenario("fullband", fs, [plant], primary, sensor,
                        disturbance=SignalSpec(1.0, 0, None), num_regions=1,
                        convergence=ConvergenceCriterion(delta=1e-3))
    return scenario.with_seed(seed)


def identify_region(scenario, region, samples, seed=5, bank=None):
    """Open-loop identification of one region with region-limited excitation.

    White noise (seeded by ``seed``) passes through analyser ``region`` and is
    scaled to ``scenario.excitation_amplitude`` RMS, then drives the region's
    plant channel on top of the scenario's disturbance. The region's
    :class:`~subband_ffc.sysid.Identifier` runs on the subband signals and is
    returned.
    """
    bank = bank if bank is not None else scenario.make_bank()
    h = bank.coeffs[region]
    rng = np.random.default_rng(seed)
    drive_u = filter_signal(TransferFunction(h, [1.0], bank.fs), rng.standard_normal(samples))
    drive_u *= scenario.excitation_amplitude / math.sqrt(float(h @ h))
    base = run_open_loop(scenario, samples)
    e = filter_signal(scenario.plant_for_region(region), drive_u) + base.v_b + base.n
    a_i = analyze(bank, base.a)[region]
    e_i = analyze(bank, e)[region]
    u_i = analyze(bank, drive_u)[region]
    ident = Identifier(scenario.region_orders[region], lam=scenario.lambda_S[region],
                       sigma=scenario.rls_sigma, fs=scenario.sample_rate_hz)
    for ak, ek, uk in zip(a_i.tolist(), e_i.tolist(), u_i.tolist()):
        ident.begin(ak)
        ident.observe(ek, uk)
    return ident
