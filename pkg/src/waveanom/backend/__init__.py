"""Backend selection for the convolution kernels.

The kernels exist twice with identical signatures and semantics: a Cython
extension (`_convkernels`) and a numpy fallback (`_convkernels_py`). The
extension is used when importable; set ``WAVEANOM_BACKEND=python`` or
``WAVEANOM_BACKEND=compiled`` to force one side. ``benchmarks/bench_backends.py``
times the two against each other.
"""
import os

from . import _convkernels_py

_choice = os.environ.get("WAVEANOM_BACKEND", "auto").lower()

if _choice == "python":
    _impl = _convkernels_py
elif _choice == "compiled":
    from . import _convkernels as _impl  # ImportError here means it was never built
elif _choice == "auto":
    try:
        from . import _convkernels as _impl
    except ImportError:
        _impl = _convkernels_py
else:
    raise ValueError(f"WAVEANOM_BACKEND must be auto, python or compiled, got {_choice!r}")

conv2d_forward = _impl.conv2d_forward
conv2d_grad_input = _impl.conv2d_grad_input
conv2d_grad_kernel = _impl.conv2d_grad_kernel


def backend_name():
    """Which kernel implementation is active: 'compiled' or 'python'."""
    return "python" if _impl is _convkernels_py else "compiled"
