"""Build script for the compiled kernel extension.

The package works without the extension (a pure-Python lane is selected at
import time), so a missing Cython or compiler only costs speed.

Build in place for development:

    python3 setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "ergodic_annealing._kernels._core",
                ["src/ergodic_annealing/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
