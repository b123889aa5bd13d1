"""Build script: compiles the Cython trajectory kernel when a toolchain is
available.  The package works without it (pure-python fallback), so any
compilation failure downgrades to a source-only install instead of aborting.
"""

import sys

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "spintrack._loop_cy",
                ["src/spintrack/_loop_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
else:
    print("Cython not found; installing with the pure-python kernel only.",
          file=sys.stderr)

setup(ext_modules=ext_modules)
