"""Hot loops of the resampling simulator.

Each kernel has two implementations with the same contract: a numba
``@njit`` loop and a vectorised numpy fallback. The numba path is used when
numba imports and ``DROUGHTRATE_DISABLE_NUMBA`` is unset (or ``0``); set it
to ``1`` to force the numpy path. Both are always importable by name so the
benchmark and the tests can compare them.

All kernels take ``idx``, an ``(R, h)`` int64 array of resampled year
indices (one row per replication), and work row by row: a row's result
depends only on that row, never on how rows are batched.
"""

import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap


def _env_disabled():
    return os.environ.get("DROUGHTRATE_DISABLE_NUMBA", "0").strip().lower() in (
        "1", "true", "yes", "on",
    )


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


# -- numba -------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _row_mean_var_nb(values, idx):
    R, h = idx.shape
    means = np.empty(R)
    variances = np.empty(R)
    for r in range(R):
        # shift by the row's first draw: exact zero variance for constant rows
        shift = values[idx[r, 0]]
        s = 0.0
        for k in range(h):
            s += values[idx[r, k]] - shift
        md = s / h
        means[r] = shift + md
        if h < 2:
            variances[r] = np.nan
            continue
        ss = 0.0
        for k in range(h):
            d = values[idx[r, k]] - shift - md
            ss += d * d
        variances[r] = ss / (h - 1)
    return means, variances


@njit(cache=True, nogil=True)
def _row_count_nb(flags, idx):
    R, h = idx.shape
    counts = np.zeros(R, dtype=np.int64)
    for r in range(R):
        c = 0
        for k in range(h):
            if flags[idx[r, k]]:
                c += 1
        counts[r] = c
    return counts


@njit(cache=True, nogil=True)
def _scheme_paths_nb(surplus, idx, declared, instalment, retained, gamma):
    R, h = idx.shape
    mean_outlay = np.empty(R)
    ruined = np.zeros(R, dtype=np.bool_)
    premium = gamma * instalment
    covered = retained * instalment
    for r in range(R):
        total = 0.0
        cum = 0.0
        for k in range(h):
            pay = premium + (covered if declared[r, k] else instalment)
            total += pay
            cum += surplus[idx[r, k]] - pay
            if cum < 0.0:
                ruined[r] = True
        mean_outlay[r] = total / h
    return mean_outlay, ruined


# -- numpy -------------------------------------------------------------------


def _row_mean_var_np(values, idx):
    x = values[idx]
    h = x.shape[1]
    d = x - x[:, :1]
    md = d.sum(axis=1) / h
    means = x[:, 0] + md
    if h < 2:
        return means, np.full(x.shape[0], np.nan)
    variances = ((d - md[:, None]) ** 2).sum(axis=1) / (h - 1)
    return means, variances


def _row_count_np(flags, idx):
    return np.count_nonzero(np.asarray(flags, dtype=bool)[idx], axis=1).astype(np.int64)


def _scheme_paths_np(surplus, idx, declared, instalment, retained, gamma):
    pay = gamma * instalment + np.where(declared, retained * instalment, instalment)
    h = idx.shape[1]
    mean_outlay = pay.sum(axis=1) / h
    cum = np.cumsum(surplus[idx] - pay, axis=1)
    ruined = np.any(cum < 0.0, axis=1)
    return mean_outlay, ruined


KERNELS = {
    "numba": {
        "row_mean_var": _row_mean_var_nb,
        "row_count": _row_count_nb,
        "scheme_paths": _scheme_paths_nb,
    },
    "numpy": {
        "row_mean_var": _row_mean_var_np,
        "row_count": _row_count_np,
        "scheme_paths": _scheme_paths_np,
    },
}


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _dispatch(name):
    return KERNELS[backend()][name]


def row_mean_var(values, idx):
    """Per-row mean and unbiased variance of ``values[idx[r]]``."""
    return _dispatch("row_mean_var")(
        np.ascontiguousarray(values, dtype=np.float64), np.ascontiguousarray(idx, dtype=np.int64)
    )


def row_count(flags, idx):
    """Per-row count of ``flags[idx[r, k]]`` that are true."""
    return _dispatch("row_count")(
        np.ascontiguousarray(flags, dtype=np.bool_), np.ascontiguousarray(idx, dtype=np.int64)
    )


def scheme_paths(surplus, idx, declared, instalment, retained, gamma):
    """Per-row mean farmer outlay and whether the cumulative residual
    (surplus minus outlay) ever went negative."""
    return _dispatch("scheme_paths")(
        np.ascontiguousarray(surplus, dtype=np.float64),
        np.ascontiguousarray(idx, dtype=np.int64),
        np.ascontiguousarray(declared, dtype=np.bool_),
        float(instalment), float(retained), float(gamma),
    )
