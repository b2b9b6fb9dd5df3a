# Builds the optional Cython statevector kernels. The package works without
# them (a numpy fallback is selected at import), so any build failure here
# degrades to the pure-Python path instead of aborting the install.
import sys

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy

    ext_modules = cythonize(
        [
            Extension(
                "qdcc._sv_cy",
                ["src/qdcc/_sv_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"qdcc: skipping Cython kernels ({exc}); numpy fallback will be used", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
