"""Build the optional Cython kernel core.

The package works without it: ``mixselect.backend`` falls back to the
numpy implementation when the extension is not importable.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("MIXSELECT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "mixselect._kernels_ext",
                    sources=["src/mixselect/_kernels_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
