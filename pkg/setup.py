from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the numpy
# implementations in contactkam._core_py when the extension is absent.
ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "contactkam._core",
                ["src/contactkam/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
