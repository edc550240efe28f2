"""Build script: compiles the optional traversal kernel extension.

The package is fully functional without the extension; ``graphforge.kernels``
falls back to the pure-Python twin at import time. Set GRAPHFORGE_NO_EXT=1
to skip compilation entirely, e.g. on machines without a C toolchain.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Try to build the kernels; fall back to pure Python on any failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"graphforge: skipping compiled kernels ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"graphforge: skipping {ext.name} ({exc})")


ext_modules = []
if not os.environ.get("GRAPHFORGE_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "graphforge.kernels._fast",
                    ["src/graphforge/kernels/_fast.pyx"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # pragma: no cover - build-env dependent
        print(f"graphforge: skipping compiled kernels ({exc})")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
