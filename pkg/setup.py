import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext_module = Extension(
    "stabgame._bitcore",
    ["src/stabgame/_bitcore.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize(ext_module, language_level=3))
