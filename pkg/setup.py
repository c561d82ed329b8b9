"""Build hook for the optional compiled kernels.

When Cython or a C compiler is unavailable the package installs without the
extension and falls back to the numpy kernels at import time.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SUBBAND_FFC_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("subband_ffc._kernels._ckernels",
                       ["src/subband_ffc/_kernels/_ckernels.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3"])],
            language_level=3)

setup(ext_modules=ext_modules)
