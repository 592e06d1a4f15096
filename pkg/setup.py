"""Build script: compiles the optional acceptance-check extension.

The package works without the extension (a pure-Python kernel is selected
at import time), so a missing compiler or Cython only costs speed.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TACINFER_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "tacinfer._kernel._accel",
                    sources=["src/tacinfer/_kernel/_accel.pyx"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
