"""Build script: compiles the optional Cython kernels.

The package works without the extension (a NumPy fallback is selected at
import time); building it is worth roughly an order of magnitude on the
orbit-heavy experiments.
"""

import os

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "intermap._kernels",
                sources=[os.path.join("src", "intermap", "_kernels.pyx")],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython or NumPy at build time: ship the pure-Python package.
    ext_modules = []

setup(ext_modules=ext_modules)
