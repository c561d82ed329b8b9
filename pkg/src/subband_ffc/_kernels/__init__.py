"""Streaming numerical kernels.

The compiled ``_ckernels`` extension is used when it is importable; otherwise
the numpy implementation in ``_pykernels`` is selected. Setting the
environment variable ``SUBBAND_FFC_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

if os.environ.get("SUBBAND_FFC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
LFilter = _impl.LFilter
SOSFilter = _impl.SOSFilter
FIRBank = _impl.FIRBank
ShiftRegister = _impl.ShiftRegister
RLS = _impl.RLS
DriftMonitor = _impl.DriftMonitor
schur_stable = _impl.schur_stable

__all__ = ["BACKEND", "LFilter", "SOSFilter", "FIRBank", "ShiftRegister",
           "RLS", "DriftMonitor", "schur_stable"]
