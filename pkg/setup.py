"""Build script for the optional compiled kernel core.

The package works without the extension: evodrift._kernels falls back to a
pure-numpy implementation of the same routines when the compiled module is
absent.  Compilation failures therefore downgrade to a warning instead of
aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that tolerates a missing or broken C toolchain."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            warnings.warn(f"skipping compiled kernels ({exc}); "
                          "pure-numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            warnings.warn(f"failed to build {ext.name} ({exc}); "
                          "pure-numpy fallback will be used")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build environment without cython
        return []
    ext = Extension(
        "evodrift._kernels._core",
        ["src/evodrift/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
