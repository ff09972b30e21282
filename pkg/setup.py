"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a pure-Python fallback is
selected at import time), so any failure here only costs speed.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Try to build the accelerator; fall back to pure Python on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the cvfrac._speedups extension failed ({exc}); "
            "installing with the pure-Python kernel fallback.",
            file=sys.stderr,
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print(
            "WARNING: Cython not available; skipping the compiled kernel core.",
            file=sys.stderr,
        )
        return []
    ext = Extension(
        "cvfrac._speedups",
        ["src/cvfrac/_speedups.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
