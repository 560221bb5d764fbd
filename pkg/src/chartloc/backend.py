"""Backend selection for the hot kernels.

Two implementations of the pairwise-dissimilarity and all-pairs-shortest-path
kernels exist: a numba one (default when numba imports) and a pure
numpy/scipy one. ``CHARTLOC_BACKEND=numba|numpy`` forces the choice;
:func:`use_backend` overrides it programmatically (tests, CLI flag).

Both backends produce the same values up to float64 summation-order noise
(agreement is tested at rtol 1e-10).
"""

import os

_FORCED = None
_NUMBA_OK = None


def _numba_available():
    global _NUMBA_OK
    if _NUMBA_OK is None:
        try:
            import numba  # noqa: F401
            _NUMBA_OK = True
        except ImportError:
            _NUMBA_OK = False
    return _NUMBA_OK


def active_backend():
    """Resolve the backend name: forced > CHARTLOC_BACKEND > auto."""
    if _FORCED is not None:
        return _FORCED
    env = os.environ.get("CHARTLOC_BACKEND", "").strip().lower()
    if env:
        if env not in ("numba", "numpy"):
            raise ValueError(
                "CHARTLOC_BACKEND must be 'numba' or 'numpy', got %r" % env)
        if env == "numba" and not _numba_available():
            raise RuntimeError("CHARTLOC_BACKEND=numba but numba is not importable")
        return env
    return "numba" if _numba_available() else "numpy"


def use_backend(name):
    """Force a backend (None restores env/auto resolution)."""
    global _FORCED
    if name is not None and name not in ("numba", "numpy"):
        raise ValueError("backend must be 'numba', 'numpy' or None")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _FORCED = name


def set_threads(n):
    """Cap kernel parallelism. BLAS thread caps must be exported before
    numpy is first imported; the CLI does that, here we only steer numba."""
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    if _numba_available():
        import warnings

        import numba
        with warnings.catch_warnings():
            # stale-TBB notice from the threading layer probe is harmless
            warnings.filterwarnings(
                "ignore", message="The TBB threading layer requires TBB version")
            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def adp_pairwise(h, norms):
    """Dispatch the (L, C, M) windowed-CIR pairwise dissimilarity kernel."""
    if active_backend() == "numba":
        from . import _kernels_numba as k
    else:
        from . import _kernels_numpy as k
    return k.adp_pairwise(h, norms)


def dijkstra_all_pairs(indptr, indices, weights, n):
    """Dispatch all-pairs shortest paths on a CSR adjacency."""
    if active_backend() == "numba":
        from . import _kernels_numba as k
    else:
        from . import _kernels_numpy as k
    return k.dijkstra_all_pairs(indptr, indices, weights, n)
