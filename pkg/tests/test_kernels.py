import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subband_ffc import DivergenceError, DimensionError, NumericInputError
from subband_ffc import _kernels
from subband_ffc._kernels import _pykernels

try:
    from subband_ffc._kernels import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def test_selected_backend_is_known():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.BACKEND)
def test_non_finite_samples_rejected(mod):
    for k in (mod.LFilter([1.0], [1.0, -0.5]), mod.SOSFilter([[1, 0, 0, 1, -0.5, 0]]),
              mod.FIRBank(np.ones((2, 4)))):
        with pytest.raises(NumericInputError):
            k.step(float("nan"))
    with pytest.raises(NumericInputError):
        mod.ShiftRegister(np.zeros(3)).push(float("inf"))


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.BACKEND)
def test_rls_rejects_wrong_length_and_rolls_back(mod):
    theta, F = np.zeros(2), np.eye(2)
    rls = mod.RLS(theta, F, 0.5, 3.0)
    with pytest.raises(DimensionError):
        rls.update(np.zeros(3), 1.0)
    with pytest.raises(DivergenceError):
        rls.update(np.zeros(2), 1.0)
    np.testing.assert_array_equal(F, np.eye(2))


@needs_ext
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_filters_agree_across_backends(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(200)
    b, a = rng.standard_normal(4), np.r_[1.0, np.poly([0.5, -0.3, 0.7])[1:]]
    sos = np.array([[0.5, 0.2, 0.1, 1.0, -0.9, 0.2], [1.0, -0.4, 0.0, 1.0, 0.3, 0.0]])
    h = rng.standard_normal((3, 16))
    for ctor in (lambda m: m.LFilter(b, a), lambda m: m.SOSFilter(sos)):
        py, cy = ctor(_pykernels), ctor(_ckernels)
        np.testing.assert_allclose([py.step(v) for v in x[:100]], [cy.step(v) for v in x[:100]],
                                   rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(py.run(x[100:]), cy.run(x[100:]), rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(py.state, cy.state, rtol=1e-12, atol=1e-13)
    fp, fc = _pykernels.FIRBank(h), _ckernels.FIRBank(h)
    for v in x:
        np.testing.assert_allclose(np.array(fp.step(v)), np.array(fc.step(v)),
                                   rtol=1e-12, atol=1e-13)


@needs_ext
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 15), st.floats(0.95, 1.0))
def test_rls_agrees_across_backends(seed, p, lam):
    states = {}
    for mod in (_pykernels, _ckernels):
        theta, F = np.zeros(p), 100.0 * np.eye(p)
        rls = mod.RLS(theta, F, lam, 1e12)
        inner = np.random.default_rng(seed)
        for _ in range(100):
            phi = inner.standard_normal(p)
            rls.update(phi, inner.standard_normal() - rls.predict(phi))
        states[mod.BACKEND] = (theta, F)
    np.testing.assert_allclose(states["python"][0], states["cython"][0], rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(states["python"][1], states["cython"][1], rtol=1e-9, atol=1e-10)


@needs_ext
def test_drift_monitor_and_shift_register_agree():
    rng = np.random.default_rng(7)
    thetas = np.cumsum(rng.standard_normal((300, 5)) * 0.01, axis=0) + 1.0
    mp, mc = _pykernels.DriftMonitor(5, 20, 0.05), _ckernels.DriftMonitor(5, 20, 0.05)
    for th in thetas:
        assert mp.push(th) == pytest.approx(mc.push(th), rel=1e-12)
        assert mp.quiet == mc.quiet
    bp, bc = np.zeros(6), np.zeros(6)
    sp, sc = _pykernels.ShiftRegister(bp), _ckernels.ShiftRegister(bc)
    w = rng.standard_normal(6)
    for v in rng.standard_normal(20):
        sp.push(v)
        sc.push(v)
        assert sp.dot(w) == pytest.approx(sc.dot(w), rel=1e-12, abs=1e-15)
    np.testing.assert_array_equal(bp, bc)


@st.composite
def polynomials(draw):
    n = draw(st.integers(1, 8))
    roots = []
    while len(roots) < n:
        r = draw(st.floats(0.0, 1.5))
        if abs(r - 1.0) < 1e-3:
            continue
        if n - len(roots) >= 2 and draw(st.booleans()):
            w = draw(st.floats(0.01, 3.1))
            roots += [r * np.exp(1j * w), r * np.exp(-1j * w)]
        else:
            roots.append(r * draw(st.sampled_from([-1.0, 1.0])))
    return np.real(np.poly(roots)), roots


@settings(max_examples=100, deadline=None)
@given(polynomials())
def test_schur_test_agrees_with_roots(poly_roots):
    den, roots = poly_roots
    expected = bool(np.max(np.abs(roots)) < 1.0)
    for mod in BACKENDS:
        assert mod.schur_stable(den) == expected


@needs_ext
def test_closed_loop_agrees_across_backends(tmp_path):
    import os
    import subprocess
    import sys

    code = ("import sys, numpy as np, subband_ffc as s\n"
            "sc = s.make_synthetic_scenario(difficulty='smoke')\n"
            "tr = s.run(s.Scheduler(sc), sc, 15000)\n"
            "np.save(sys.argv[1], tr.e)\n"
            "print(s.BACKEND)\n")
    out = {}
    for flag in ("0", "1"):
        path = tmp_path / f"e{flag}.npy"
        env = dict(os.environ, SUBBAND_FFC_PURE_PYTHON=flag)
        res = subprocess.run([sys.executable, "-c", code, str(path)], env=env,
                             check=True, capture_output=True, text=True)
        out[res.stdout.strip()] = np.load(path)
    assert set(out) == {"cython", "python"}
    np.testing.assert_allclose(out["cython"], out["python"], rtol=0, atol=1e-9)
