import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # sdist without Cython: pure-Python fallback only
    cythonize = None

openmp = [] if sys.platform == "darwin" or os.environ.get("TOWERSITE_NO_OPENMP") else ["-fopenmp"]

extensions = [
    Extension(
        "towersite._core",
        ["src/towersite/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"] + openmp,
        extra_link_args=openmp,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"})
    if cythonize else [],
)
