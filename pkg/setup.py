"""Build script for the optional compiled training kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the per-batch training
step faster. Installation must therefore survive a missing Cython or a
broken C toolchain.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "softlabels.training._kernels",
                sources=["src/softlabels/training/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
