"""Backend selection for the autoencoder kernels.

Set CSILOC_KERNELS=numpy to force the pure-numpy fallback, or
CSILOC_KERNELS=numba to require the jitted kernels (import error if
numba is missing).  Default: numba when available, numpy otherwise.
"""

import os

_requested = os.environ.get("CSILOC_KERNELS", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"CSILOC_KERNELS must be 'numba', 'numpy' or unset, got {_requested!r}")

if _requested == "numpy":
    from . import _numpy as _impl
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy as _impl
        BACKEND = "numpy"

encode_batch = _impl.encode_batch
decode_batch = _impl.decode_batch
forward_batch = _impl.forward_batch
batch_loss = _impl.batch_loss
loss_and_grads = _impl.loss_and_grads


def backend_name() -> str:
    return BACKEND
