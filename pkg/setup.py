import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The bit-generator C distributions live in numpy's static helper library.
_npyrandom_dir = os.path.join(os.path.dirname(np.__file__), "random", "lib")

extensions = [
    Extension(
        "signvar._kernels",
        ["src/signvar/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[_npyrandom_dir],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
