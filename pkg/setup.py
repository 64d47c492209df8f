"""Build hook: compile the optional Cython contraction kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any build failure here downgrades to a pure
build instead of aborting the install. Set BELIEFBOUNDS_PURE=1 to skip the
extension on purpose.
"""

import os

from setuptools import setup

ext_modules = []
include_dirs = []
if os.environ.get("BELIEFBOUNDS_PURE") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/beliefbounds/_kernels.pyx"],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
        include_dirs = [numpy.get_include()]
    except Exception:
        ext_modules = []
        include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
