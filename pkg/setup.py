"""Build script for the optional compiled kernels.

The package works without the extension; ``hierlat.kernels`` falls back to
the numpy implementation when ``hierlat._kernels`` cannot be imported.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("HIERLAT_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "hierlat._kernels",
                    ["src/hierlat/_kernels.pyx"],
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-math-errno"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
