"""Build the optional Cython kernels; the package works without them."""
import os
import sys

from setuptools import Extension, setup


def extensions():
    if os.environ.get("SQHHG_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        print("Cython or numpy missing: building without compiled kernels", file=sys.stderr)
        return []
    omp = [] if sys.platform == "darwin" else ["-fopenmp"]
    ext = Extension(
        "sqhhg._kernels_c",
        ["src/sqhhg/_kernels_c.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"] + omp,
        extra_link_args=omp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
