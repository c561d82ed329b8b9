from dataclasses import replace

import numpy as np
import pytest

from subband_ffc import (ConvergenceCriterion, DivergenceError, PlantSim, RegionOrders,
                         RegionPhase, Scheduler, band_powers, make_synthetic_scenario, run,
                         welch_psd)
from subband_ffc.scheduler import MAX_RETRIES, check_convergence


@pytest.fixture(scope="module")
def smoke():
    return make_synthetic_scenario(difficulty="smoke")


def stepped_run(scenario, samples, on_sample):
    """Drive the loop sample by sample, calling ``on_sample(sched, k)`` after each."""
    sched = Scheduler(scenario)
    plant = PlantSim(scenario)
    for k in range(samples):
        a = plant.sense()
        sched.step(a, plant.step)
        on_sample(sched, k)
    return sched


# -- convergence test ---------------------------------------------------------------

def test_constant_parameters_converge():
    crit = ConvergenceCriterion(window=50, delta=1e-4, min_samples=100, max_samples=1000)
    assert check_convergence(np.ones((200, 3)), crit)


def test_growing_parameters_do_not_converge():
    crit = ConvergenceCriterion(window=50, delta=1e-4, min_samples=100, max_samples=1000)
    k = np.arange(400)
    history = np.outer(1.01 ** (k / 50), np.ones(3))
    assert not check_convergence(history, crit)


def test_convergence_needs_min_samples():
    crit = ConvergenceCriterion(window=10, delta=1e-4, min_samples=500, max_samples=1000)
    assert not check_convergence(np.ones((100, 2)), crit)


# -- run structure ----------------------------------------------------------------------

def test_only_first_region_controls_initially(smoke_run):
    tr = smoke_run.trace
    first_freeze = min(r["frozen_at"] for r in smoke_run.regions)
    assert np.all(tr.active_region[:first_freeze + 1] == 0)
    np.testing.assert_array_equal(tr.u_Q[1:, :first_freeze + 1], 0.0)


def test_noiseless_smoke_run_converges_without_budget_flag(smoke_run):
    assert smoke_run.reasons == ["converged"] * 4
    assert not any(ev.get("flag") == "budget_exhausted" for ev in smoke_run.trace.events)
    crit = smoke_run.scenario.convergence
    assert all(r["samples_active"] < crit.max_samples for r in smoke_run.regions)


def test_monotone_activation_follows_region_order(smoke_run):
    events = smoke_run.trace.events
    activated = [ev for ev in events if ev["event"] == "activated"]
    frozen = [ev for ev in events if ev["event"] == "frozen"]
    assert [ev["region"] for ev in activated] == smoke_run.scenario.region_order
    for prev, nxt in zip(frozen, activated[1:]):
        assert nxt["k"] == prev["k"]


def test_terminal_state_is_fixed_feedforward(smoke_run):
    tr = smoke_run.trace
    done = next(ev["k"] for ev in tr.events if ev["event"] == "all_frozen")
    tail = slice(done + 1, None)
    assert np.all(tr.active_region[tail] == -1)
    np.testing.assert_array_equal(tr.u_E[tail], 0.0)
    np.testing.assert_allclose(tr.u[0, tail], tr.u_Q[:, tail].sum(axis=0),
                               rtol=1e-12, atol=1e-15)


def test_frozen_parameters_bitwise_constant(smoke):
    two = replace(smoke, num_regions=2, region_orders=RegionOrders(5, 5, 45),
                  lambda_S=None, lambda_Q=0.9998, region_to_channel=None,
                  region_order=None)
    seen = {}

    def check(sched, k):
        for slot in sched.regions:
            if slot.phase is RegionPhase.FROZEN:
                th = (slot.ident.theta.tobytes(), slot.ctl.theta_Q.tobytes())
                assert seen.setdefault(slot.index, th) == th

    sched = stepped_run(two, 9000, check)
    assert sched.regions[0].phase is RegionPhase.FROZEN
    assert sched.regions[1].samples > 0


def test_sequential_mode_updates_one_region(smoke):
    seq = replace(smoke, mode="sequential")
    state = {}

    def check(sched, k):
        snap = {s.index: (s.ident.theta.tobytes(), s.ctl.theta_Q.tobytes())
                for s in sched.regions}
        if state:
            assert sum(snap[i] != state[i] for i in snap) <= 1
        state.update(snap)

    sched = stepped_run(seq, 8000, check)
    assert any(ev["event"] == "model_fixed" for ev in sched.events)


# -- excitation -------------------------------------------------------------------------

def test_zero_amplitude_excitation(smoke):
    sched = Scheduler(replace(smoke, excitation_amplitude=0.0))
    assert all(sched.excitation() == 0.0 for _ in range(100))


def test_excitation_confined_to_active_band(smoke):
    sched = Scheduler(replace(smoke, region_order=[2, 0, 1, 3]))
    x = np.array([sched.excitation() for _ in range(2 ** 16)])
    bank = sched.bank
    psd = welch_psd(x, 4096, 0.5, bank.fs)
    lo, hi = bank.band_edges[2]
    in_band = np.mean(psd.density[(psd.freqs_hz > lo) & (psd.freqs_hz < hi)])
    for j in (0, 1, 3):
        level = np.interp(bank.center_hz(j), psd.freqs_hz, psd.density)
        assert 10 * np.log10(level / in_band) <= -60.0
    powers = band_powers(x, bank.band_edges, bank.fs)
    assert 10 * np.log10(powers[0] / powers[2]) <= -60.0
    assert np.sqrt(np.mean(x ** 2)) == pytest.approx(smoke.excitation_amplitude, rel=0.05)


def test_excitation_is_deterministic(smoke):
    s1, s2 = Scheduler(smoke), Scheduler(smoke)
    np.testing.assert_array_equal([s1.excitation() for _ in range(5000)],
                                  [s2.excitation() for _ in range(5000)])


# -- scenarios ------------------------------------------------------------------------

def test_single_region_is_fullband_control(fullband_run):
    tr = fullband_run.trace
    assert fullband_run.reasons == ["converged"]
    np.testing.assert_allclose(tr.u[0], tr.u_Q[0] + tr.u_E, rtol=1e-12, atol=1e-15)
    assert fullband_run.attenuation_db[0] >= 20.0


@pytest.mark.xfail(strict=True, reason="the default drift threshold is not reached by the "
                   "desk controller under persistent disturbance; see decisions ledger")
def test_desk_completes_under_default_criterion():
    desk = replace(make_synthetic_scenario(difficulty="desk"),
                   convergence=ConvergenceCriterion())
    trace = run(Scheduler(desk), desk, 200_000)
    assert [r["reason"] for r in trace.snapshots["regions"]] == ["converged"] * 4


def test_dual_channel_region_split(full_run):
    assert full_run.scenario.region_to_channel == [0, 0, 1, 1]
    assert [r["channel"] for r in full_run.regions] == [0, 0, 1, 1]


# -- divergence -------------------------------------------------------------------------

def test_divergence_halts_with_region(smoke):
    bad = replace(smoke, controller_sigma=1e13, region_order=[1, 0, 2, 3])
    with pytest.raises(DivergenceError) as info:
        run(Scheduler(bad), bad, 100)
    assert info.value.region == 1


def test_retry_policy_gives_up_after_limit(smoke):
    bad = replace(smoke, controller_sigma=1e13, on_divergence="retry")
    sched = Scheduler(bad)
    with pytest.raises(DivergenceError):
        run(sched, bad, 100)
    assert sum(ev["event"] == "diverged" for ev in sched.events) == MAX_RETRIES + 1
