"""Build script for the compiled numerical kernel.

The package works without the extension (a pure NumPy/SciPy fallback is
selected at import time), but the compiled kernel is roughly an order of
magnitude faster on the membrane integration hot loop.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext = Extension(
        "pulseopt._kernel",
        ["src/pulseopt/_kernel.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
