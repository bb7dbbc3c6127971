"""Kernel backend selection.

Hot numeric loops exist twice: a numba ``@njit`` build (:mod:`.jit`) and a
vectorized pure-numpy fallback (:mod:`.reference`).  The active backend is
chosen once at import from the ``MPSTS_NUMBA`` environment variable:

* ``auto`` (default, or unset) - use numba when importable, else numpy;
* ``1``/``true``/``on``  - require numba, raise if it cannot be imported;
* ``0``/``false``/``off`` - force the pure-numpy fallback.

``MPSTS_THREADS`` caps numba's thread pool (the kernels themselves are
serial, so this only matters for embedders that re-enter numba elsewhere).
``set_backend`` exists so tests and benchmarks can exercise both builds in
one process.
"""

from __future__ import annotations

import os
import warnings

from . import reference

_FORCE_ON = ("1", "true", "on", "yes", "force")
_FORCE_OFF = ("0", "false", "off", "no")


def _load_jit():
    from . import jit as jit_module

    threads = os.environ.get("MPSTS_THREADS", "")
    if threads.strip():
        try:
            import numba

            numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
        except (ImportError, ValueError):
            pass
    return jit_module


def _select_initial():
    choice = os.environ.get("MPSTS_NUMBA", "auto").strip().lower()
    if choice in _FORCE_OFF:
        return reference
    try:
        return _load_jit()
    except ImportError:
        if choice in _FORCE_ON:
            raise
        warnings.warn("numba unavailable; falling back to pure-numpy kernels")
        return reference


_active = _select_initial()


def get_backend():
    """The module providing the currently active kernel set."""
    return _active


def backend_name() -> str:
    return _active.NAME


def set_backend(name: str):
    """Switch kernels at runtime ('jit' or 'reference'); returns the module."""
    global _active
    if name == "reference":
        _active = reference
    elif name == "jit":
        _active = _load_jit()
    else:
        raise ValueError(f"unknown backend {name!r}")
    return _active


def lgamma(x):
    return _active.lgamma(x)


def pmf_table(mu0, m, M, K, nmax):
    return _active.pmf_table(mu0, m, M, K, nmax)


def compound_table(mu0, a, nmax):
    return _active.compound_table(mu0, a, nmax)


def loglike_photocount_scan(mu0s, ms, Ms, K, data_n, data_d, dark_rate):
    return _active.loglike_photocount_scan(mu0s, ms, Ms, K, data_n, data_d, dark_rate)


def hermite_table(nmax, q):
    return _active.hermite_table(nmax, q)


def sample_counts(cdf, key, counter0, n):
    return _active.sample_counts(cdf, key, counter0, n)


def subtraction_oracle(seed, stream_id, n, m, M, K, geom_cdf, accept_p):
    return _active.subtraction_oracle(seed, stream_id, n, m, M, K, geom_cdf, accept_p)
