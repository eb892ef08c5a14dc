"""Build script: compiles the optional Cython kernel extension.

The extension is best-effort. When Cython or a C compiler is missing (or
TENSPIPE_SKIP_EXT=1 is set) the package installs without it and
tenspipe.kernels falls back to the NumPy implementations at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("TENSPIPE_SKIP_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "tenspipe.kernels._ckernels",
                    ["src/tenspipe/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
