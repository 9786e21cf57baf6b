import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ALELAB_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("alelab._kernels", ["src/alelab/_kernels.pyx"], extra_compile_args=["-O3", "-fcx-fortran-rules"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
