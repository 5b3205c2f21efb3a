"""Build script for the optional compiled stencil kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the hot stencil loops
faster.  If Cython or a C compiler is unavailable the build degrades to the
pure-Python install instead of failing.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("carlat: Cython not available, skipping compiled kernels", file=sys.stderr)
        return []
    from setuptools import Extension

    ext = Extension(
        "carlat._kernels._core",
        ["src/carlat/_kernels/_core.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
