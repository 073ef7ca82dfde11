"""Build script: compiles the optional fast-kernel extension.

The extension is a pure optimization; if the toolchain is missing the
install degrades to the numpy kernel module and everything still works.
"""

import logging

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

log = logging.getLogger("mmfusion.setup")

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # no Cython/numpy at build time: ship pure python
    numpy = None
    cythonize = None


class OptionalBuildExt(build_ext):
    """build_ext that downgrades compile failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            log.warning("skipping compiled kernels (%s); using numpy fallback", exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            log.warning("failed to build %s (%s); using numpy fallback", ext.name, exc)


if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "mmfusion._ckernels",
                sources=["src/mmfusion/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
else:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
