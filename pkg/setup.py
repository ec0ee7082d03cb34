import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("FLASHREAD_NO_EXT"):
    extensions = [
        Extension(
            "flashread._kernels",
            ["src/flashread/_kernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            libraries=["m"],
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
