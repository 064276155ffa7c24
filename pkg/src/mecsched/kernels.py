"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is.  Set ``MECSCHED_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from ._kernels_py import (BW, F_FLOOR, F_LOCAL, F_MAX, N_CONSTS, NOISE, P_EXEC,
                          P_MAX, P_MIN, PHI_E, PHI_T)
from .sysmodel import F_FLOOR as _F_FLOOR
from .sysmodel import P_MIN as _P_MIN
from .sysmodel import SystemConfig, local_exec_power

_compiled = None
if os.environ.get("MECSCHED_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

backend = _compiled if _compiled is not None else _kernels_py
BACKEND_NAME = "cython" if _compiled is not None else "python"


def compiled_backend():
    """The compiled module, or None when it is unavailable."""
    return _compiled


def pack_consts(config: SystemConfig) -> np.ndarray:
    c = np.empty(N_CONSTS)
    c[BW] = config.bandwidth
    c[NOISE] = config.noise_power
    c[F_LOCAL] = config.f_local
    c[P_EXEC] = local_exec_power(config)
    c[F_MAX] = config.f_mec_max
    c[P_MAX] = config.p_iotd_max
    c[PHI_T] = config.phi_t
    c[PHI_E] = config.phi_e
    c[P_MIN] = _P_MIN
    c[F_FLOOR] = _F_FLOOR
    return c


golden_power = backend.golden_power
cost_total = backend.cost_total
repair = backend.repair
levy_loop = backend.levy_loop
