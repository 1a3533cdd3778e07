"""Build script for the optional Cython kernel extension.

The package is fully functional without the extension: maskmatch.kernels
falls back to the numpy implementations when the compiled module is
missing. Building is therefore best-effort.
"""

import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "maskmatch.kernels._ckernels",
                ["src/maskmatch/kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"maskmatch: skipping Cython extension ({exc})", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
