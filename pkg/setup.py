import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# optional: a failed compile leaves the numpy fallback in charge
extensions = [
    Extension(
        "hpcycle._ext",
        ["src/hpcycle/_ext.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-march=native"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
