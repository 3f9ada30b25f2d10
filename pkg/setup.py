import os

import numpy as np
from setuptools import Extension, setup

# Set TRANSMITTANCE_NO_EXT=1 to install the pure-Python fallback only.
ext_modules = []
if not os.environ.get("TRANSMITTANCE_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "transmittance._kernels",
                ["src/transmittance/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: the kernels must round like the Python fallback
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
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

setup(ext_modules=ext_modules)
