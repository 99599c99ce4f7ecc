"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (pure-Python fallback is selected
at import time), so a failed compile only costs speed.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "chainquery._kernels._cy",
                ["src/chainquery/_kernels/_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
