"""Build script: compiles the optional kinematics extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); set RECONCELL_PURE=1 to skip compilation.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("RECONCELL_PURE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/reconcell/kinematics/_native.pyx"],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
