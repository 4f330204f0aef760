import os

import numpy as np
from setuptools import Extension, setup

# SPECTRAL_SDE_PURE_PYTHON=1 skips the compiled kernel entirely; the package
# then runs on the pure-Python backend.
ext_modules = []
if not os.environ.get("SPECTRAL_SDE_PURE_PYTHON"):
    from Cython.Build import cythonize

    ext = Extension(
        "spectralsde._ckernels",
        ["src/spectralsde/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off: the pure-Python backend must reproduce the
        # compiled kernels bit for bit, so FMA contraction is disabled.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
