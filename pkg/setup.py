import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernel is optional: without Cython or a compiler the package
# falls back to the numpy implementation at import time.
ext_modules = []
if os.environ.get("KORTEWEG_LAB_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "korteweg_lab._kernels",
                    ["src/korteweg_lab/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
