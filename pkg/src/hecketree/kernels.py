"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the pure-Python
module takes over with identical results.  ``use_backend`` switches at run time
(tests and benchmarks compare the two).
"""

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # no compiler at install time
    _compiled = None

_FUNCS = ("encode", "cayley_table", "inverses", "class_ids", "class_constants")

_active = _compiled if _compiled is not None else _kernels_py


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def backend():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name):
    global _active
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    elif name == "python":
        _active = _kernels_py
    else:
        raise ValueError(f"unknown backend {name!r}")


def encode(elems, M):
    return _active.encode(np.ascontiguousarray(elems, dtype=np.int64), int(M))


def cayley_table(elems, codes, M):
    return _active.cayley_table(
        np.ascontiguousarray(elems, dtype=np.int64), np.ascontiguousarray(codes, dtype=np.int64), int(M)
    )


def inverses(table, identity):
    return _active.inverses(np.ascontiguousarray(table, dtype=np.int32), int(identity))


def class_ids(table, inv):
    return _active.class_ids(
        np.ascontiguousarray(table, dtype=np.int32), np.ascontiguousarray(inv, dtype=np.int32)
    )


def class_constants(table, inv, cid, reps):
    return _active.class_constants(
        np.ascontiguousarray(table, dtype=np.int32),
        np.ascontiguousarray(inv, dtype=np.int32),
        np.ascontiguousarray(cid, dtype=np.int32),
        np.ascontiguousarray(reps, dtype=np.int32),
    )


def snf_diagonal(A):
    """Nonzero invariant factors; falls back to big integers on overflow."""
    A = np.asarray(A, dtype=object)
    if A.size == 0:
        return []
    big = max(abs(int(x)) for x in A.flat)
    if big < 2**31:
        try:
            return [int(d) for d in _active.snf_diagonal(np.ascontiguousarray(A, dtype=np.int64))]
        except OverflowError:
            pass
    return _kernels_py.snf_diagonal(A)
