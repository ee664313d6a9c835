import os
import sys

import numpy as np
from setuptools import Extension, setup

ext_kwargs = dict(
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-ffp-contract=off", "-fopenmp"],
    extra_link_args=["-fopenmp"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

ext_modules = []
if os.environ.get("AUTOMATTE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("Cython not available, installing pure-Python kernels only", file=sys.stderr)
    else:
        ext_modules = cythonize(
            [Extension("automatte._ckernels", ["src/automatte/_ckernels.pyx"], **ext_kwargs)],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
