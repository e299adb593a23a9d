"""Backend selection for the per-cell solves.

The compiled extension is used when importable; setting ``LOWMACH_PURE_PYTHON=1``
forces the numpy implementation.
"""

import os

from . import _pykernels

python_backend = _pykernels

if os.environ.get("LOWMACH_PURE_PYTHON"):
    compiled_backend = None
else:
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = backend.BACKEND

STATUS_OK = _pykernels.STATUS_OK
STATUS_VANISHING = _pykernels.STATUS_VANISHING
STATUS_NOCONV = _pykernels.STATUS_NOCONV


def closure_solve(*args, **kwargs):
    return backend.closure_solve(*args, **kwargs)


def relax_solve(*args, **kwargs):
    return backend.relax_solve(*args, **kwargs)
