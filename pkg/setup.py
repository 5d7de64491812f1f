import os
import platform
import sys

import numpy as np
from setuptools import Extension, setup

compile_args = ["-O3"]
libraries = []
if (
    sys.platform.startswith("linux")
    and platform.machine() in ("x86_64", "AMD64")
    and not os.environ.get("MIXLAB_PORTABLE_BUILD")
):
    # lets gcc vectorise the log loop through glibc's vector math library
    compile_args += ["-ffast-math", "-march=native"]
    libraries = ["mvec", "m"]

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "mixlab._kernels._ckernels",
                ["src/mixlab/_kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=compile_args,
                libraries=libraries,
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
