"""Build script for the optional compiled flow kernels.

The Cython extension accelerates the Jacobi sweeps and backward warps of
the variational flow solver. If no compiler (or Cython) is available the
install still succeeds and the package falls back to the pure-numpy
kernels at import time.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Degrade to a pure-Python install when the extension cannot build."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"flowgate: compiled kernels unavailable ({exc}); "
                          "falling back to pure-numpy kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"flowgate: failed to build {ext.name} ({exc}); "
                          "falling back to pure-numpy kernels")


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "flowgate.flow._hs_kernels",
        ["src/flowgate/flow/_hs_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
