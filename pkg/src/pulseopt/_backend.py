"""Numerical backend selection.

Imports the compiled extension when it is available and falls back to the
pure NumPy/SciPy implementations otherwise. ``BACKEND`` names the active
choice so tools and tests can report it. The tabulated membrane kernel
and the fused response-plus-gradient sweeps only exist in the compiled
extension; ``HAVE_TABULATED`` and ``HAVE_GRAD`` tell callers whether
those fast paths can be used (without them, callers fall back to finite
differences).
"""

from . import _purepy

try:
    from . import _kernel
except ImportError:
    _kernel = None

if _kernel is not None:
    BACKEND = "compiled"
    HAVE_TABULATED = True
    HAVE_GRAD = True
    spline_sample_uniform = _kernel.spline_sample_uniform
    membrane_response = _kernel.membrane_response
    membrane_response_tab = _kernel.membrane_response_tab
    membrane_smoothpeak_grad = _kernel.membrane_smoothpeak_grad
    membrane_smoothpeak_grad_tab = _kernel.membrane_smoothpeak_grad_tab
else:
    BACKEND = "pure-python"
    HAVE_TABULATED = False
    HAVE_GRAD = False
    spline_sample_uniform = _purepy.spline_sample_uniform
    membrane_response = _purepy.membrane_response
    membrane_response_tab = None
    membrane_smoothpeak_grad = None
    membrane_smoothpeak_grad_tab = None


def implementations():
    """Name -> module map of every available backend, for tests and benchmarks."""
    impls = {"pure-python": _purepy}
    if _kernel is not None:
        impls["compiled"] = _kernel
    return impls
