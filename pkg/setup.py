"""Build script: compiles the optional scheduling kernel extension.

The package works without the extension (a pure-Python kernel is selected
at import time), so a failed compile downgrades to a warning instead of
aborting the install.
"""

import warnings

from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "maars.kernel._fast",
                ["src/maars/kernel/_fast.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    warnings.warn("Cython not available; building without the compiled kernel")
    ext_modules = []

setup(ext_modules=ext_modules)
