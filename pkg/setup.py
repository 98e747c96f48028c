"""Build script: compiles the optional scanline-fill extension.

The package works without the extension; a pure NumPy kernel is selected
at import time when the compiled module is absent.  Any failure while
building the extension therefore downgrades to a warning instead of
aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that tolerates a missing or broken C toolchain."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            warnings.warn(f"skipping compiled kernel: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping compiled kernel {ext.name}: {exc}")


extensions = []
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "svgforge.raster._scanfill",
                ["src/svgforge/raster/_scanfill.pyx"],
                extra_compile_args=["-O2"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    warnings.warn("Cython not available; building without the compiled scanline kernel")

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
