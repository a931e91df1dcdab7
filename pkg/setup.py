"""Build script: compiles ``spdradial._kernels`` when Cython and a C compiler
are available, otherwise installs the pure-Python package only."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SPDRADIAL_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "spdradial._kernels",
                    ["src/spdradial/_kernels.pyx"],
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
