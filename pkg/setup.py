"""Build the optional Cython SMO core.

The extension is marked optional: if Cython or a C compiler is missing the
package still installs and falls back to the pure-Python solver.
"""
from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without the compiled core
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "landensemble._smo",
                ["src/landensemble/_smo.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
