"""Build script for the optional compiled simulation kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vaspd.simulator._kernel_cy",
                ["src/vaspd/simulator/_kernel_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
