import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/autobss/_core/_speedups.pyx",
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
except Exception as exc:  # noqa: BLE001 - extension is optional
    print(f"warning: building without compiled kernels ({exc})",
          file=sys.stderr)

setup(ext_modules=ext_modules)
