"""Backend dispatch for the hot numeric kernels.

Two interchangeable implementations exist: jitted loops (``numba_backend``)
and vectorized numpy (``numpy_backend``). Selection order:

  * ``SEQBIND_BACKEND=numba``  force the jitted kernels (raise if numba
    cannot be imported)
  * ``SEQBIND_BACKEND=numpy``  force the pure-numpy fallback
  * unset                      numba when importable, numpy otherwise

``set_backend`` overrides the choice programmatically (tests, benchmarks).
Results are deterministic within a backend; across backends they agree to
floating-point reordering (~1e-13 relative).
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError
from . import numpy_backend

_BACKENDS = {"numpy": numpy_backend}
_numba_import_error = None
try:
    from . import numba_backend

    _BACKENDS["numba"] = numba_backend
except ImportError as exc:  # pragma: no cover - depends on environment
    _numba_import_error = exc

_active = None


def _resolve_default():
    name = os.environ.get("SEQBIND_BACKEND", "").strip().lower()
    if name:
        if name not in ("numba", "numpy"):
            raise ConfigError(f"SEQBIND_BACKEND must be 'numba' or 'numpy', got {name!r}")
        if name == "numba" and "numba" not in _BACKENDS:
            raise ConfigError(f"numba backend requested but unavailable: {_numba_import_error}")
        return name
    return "numba" if "numba" in _BACKENDS else "numpy"


def backend_name():
    global _active
    if _active is None:
        _active = _resolve_default()
    return _active


def set_backend(name):
    """Force a backend for this process; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown or unavailable backend {name!r}")
    previous = backend_name()
    _active = name
    return previous


def get():
    """The active kernel module."""
    return _BACKENDS[backend_name()]


def available_backends():
    return sorted(_BACKENDS)


def warmup():
    """Run every kernel once on tiny inputs (pays numba JIT cost up front).

    Called before forking worker pools so children inherit compiled code.
    """
    k = get()
    xp = np.zeros((1, 2, 6))
    w = np.zeros((1, 2, 2))
    y, patches = k.conv1d_forward(xp, w, 1)
    k.conv1d_backward_input(y, w, 1, 6)
    k.conv1d_backward_weights(y, patches, 2, 2)
    out, arg = k.maxpool_forward(y, 2, 1)
    k.maxpool_backward(out, arg, y.shape[2])
    xproj = np.zeros((2, 1, 8))
    u = np.zeros((2, 8))
    h, c, gates, tc = k.lstm_forward(xproj, u)
    k.lstm_backward(np.zeros((1, 2)), h, c, gates, tc, np.ascontiguousarray(u.T))
    xzr = np.zeros((2, 1, 4))
    xc = np.zeros((2, 1, 2))
    uzr = np.zeros((2, 4))
    uc = np.zeros((2, 2))
    g = k.gru_forward(xzr, xc, uzr, uc)
    k.gru_backward(np.zeros((1, 2)), g[0], g[1], g[2], g[3],
                   np.ascontiguousarray(uzr.T), np.ascontiguousarray(uc.T))
    k.sgns_epoch(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(4, dtype=np.int64),
                 np.array([0, 4], dtype=np.int64), np.ones(4, dtype=np.int64),
                 np.full(40, 0.5), np.array([0.5, 0.9, 1.0]), 2, 0.025)
    k.count_signed_rank_le(np.array([2, 4, 6], dtype=np.int64), np.int64(6))
