"""Compare the compiled kernels with the pure-Python fallback.

Run from the repository root after installing the package::

    python benchmarks/bench_kernels.py [--samples 20000] [--end-to-end]

Per-kernel timings call both backends directly in one process. The
end-to-end timing runs the ``smoke`` scenario in two subprocesses, one with
``SUBBAND_FFC_PURE_PYTHON=1``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from subband_ffc._kernels import _pykernels

try:
    from subband_ffc._kernels import _ckernels
except ImportError:
    _ckernels = None


def _cases(mod, rng):
    sos = np.tile([0.2, 0.1, 0.05, 1.0, -0.5, 0.2], (8, 1))
    h = rng.standard_normal((4, 64))
    p = 15
    phis = rng.standard_normal((256, p))
    x = rng.standard_normal(256).tolist()

    sos_filter = mod.SOSFilter(sos)
    fir_bank = mod.FIRBank(h)
    buf = np.zeros(45)
    shift = mod.ShiftRegister(buf)
    theta, F = np.zeros(p), np.eye(p)
    rls = mod.RLS(theta, F, 0.9998, 1e12)
    drift = mod.DriftMonitor(p, 2000, 0.5)

    def sos_step(n):
        step = sos_filter.step
        for k in range(n):
            step(x[k & 255])

    def fir_step(n):
        step = fir_bank.step
        for k in range(n):
            step(x[k & 255])

    def shift_push(n):
        push = shift.push
        for k in range(n):
            push(x[k & 255])

    def rls_update(n):
        update, predict = rls.update, rls.predict
        for k in range(n):
            phi = phis[k & 255]
            update(phi, 0.01 * (x[k & 255] - predict(phi)))

    def drift_push(n):
        push = drift.push
        for k in range(n):
            push(phis[k & 255])

    return {"SOSFilter.step (8 sections)": sos_step,
            "FIRBank.step (4 x 64 taps)": fir_step,
            "ShiftRegister.push (45)": shift_push,
            "RLS.update (p = 15)": rls_update,
            "DriftMonitor.push (p = 15)": drift_push}


def bench_kernels(samples, repeat=3):
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    results = {}
    for name, mod in backends:
        for case, fn in _cases(mod, np.random.default_rng(0)).items():
            best = min(timeit.repeat(lambda: fn(samples), number=1, repeat=repeat))
            results.setdefault(case, {})[name] = best / samples * 1e6
    return results


def bench_end_to_end(samples):
    code = ("import time, subband_ffc as s\n"
            "sc = s.make_synthetic_scenario(difficulty='smoke')\n"
            "t = time.perf_counter()\n"
            f"s.run(s.Scheduler(sc), sc, {samples})\n"
            "print(s.BACKEND, time.perf_counter() - t)\n")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SUBBAND_FFC_PURE_PYTHON=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                             capture_output=True, text=True)
        backend, seconds = res.stdout.split()
        out[backend] = float(seconds)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--end-to-end", action="store_true",
                    help="also time a full closed-loop smoke run per backend")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<30} {'python us':>10} {'cython us':>10} {'speed-up':>9}")
    for case, t in bench_kernels(args.samples).items():
        py, cy = t["python"], t.get("cython")
        if cy is None:
            print(f"{case:<30} {py:>10.3f} {'-':>10} {'-':>9}")
        else:
            print(f"{case:<30} {py:>10.3f} {cy:>10.3f} {py / cy:>8.1f}x")
    if args.end_to_end:
        e2e = bench_end_to_end(4 * args.samples)
        print()
        for backend, seconds in sorted(e2e.items()):
            print(f"smoke scenario, {4 * args.samples} samples, {backend}: {seconds:.2f} s")
        if len(e2e) == 2:
            print(f"end-to-end speed-up: {e2e['python'] / e2e['cython']:.1f}x")


if __name__ == "__main__":
    main()
