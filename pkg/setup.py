import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

NPY_RANDOM_LIB = os.path.join(os.path.dirname(np.__file__), "random", "lib")

extensions = [
    Extension(
        "brwstable._kernels",
        ["src/brwstable/_kernels.pyx"],
        include_dirs=[np.get_include(), "src/brwstable"],
        library_dirs=[NPY_RANDOM_LIB],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # bit-identical results with the pure-Python backend need libm calls
        # without contraction or fast-math rewrites
        extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
