import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

_np_root = os.path.dirname(np.__file__)

ext = Extension(
    "harmonia._kernels",
    ["src/harmonia/_kernels.pyx"],
    include_dirs=[np.get_include()],
    library_dirs=[os.path.join(_np_root, "random", "lib"), os.path.join(_np_root, "_core", "lib")],
    libraries=["npyrandom", "npymath", "m"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(
    ext_modules=cythonize(
        [ext],
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    ),
)
