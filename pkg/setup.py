"""Build the optional compiled kernels; the package works without them."""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, Cython missing, ...
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def _extensions():
    if os.environ.get("TREEFUSION_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        "src/treefusion/_kernels.pyx",
        compiler_directives={"language_level": "3"},
        quiet=True,
    ), numpy.get_include()


exts = _extensions()
if exts:
    modules, include = exts
    for m in modules:
        m.include_dirs.append(include)
        m.extra_compile_args.append("-O3")
        m.define_macros.append(("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION"))
else:
    modules = []

setup(ext_modules=modules, cmdclass={"build_ext": OptionalBuildExt})
