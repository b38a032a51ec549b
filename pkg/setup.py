import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "cloudmarket._kernels._scan",
        ["src/cloudmarket/_kernels/_scan.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        # a missing compiler leaves the numpy fallback in place
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
