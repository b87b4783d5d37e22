import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; mpgne.kernels falls back
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("mpgne._simplex", ["src/mpgne/_simplex.pyx"],
                   include_dirs=[np.get_include()])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
