"""Build script for the optional compiled kernels.

The package is fully functional without the extension: ``sketchdeform.kernels``
falls back to the pure NumPy backend when ``sketchdeform.kernels._fast`` is
missing. Set ``SKETCHDEFORM_SKIP_EXT=1`` to install without compiling.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SKETCHDEFORM_SKIP_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "sketchdeform.kernels._fast",
                    ["src/sketchdeform/kernels/_fast.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
