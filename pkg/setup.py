"""Build script for the optional compiled kernels.

The package works without them: if Cython or a C compiler is missing the
extension is skipped and the numpy kernels are used.
"""
import numpy
from setuptools import setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"warning: compiled kernels not built ({exc}); using the numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); using the numpy fallback")


ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        ["src/rkdg/_kernels.pyx"],
        compiler_directives={"language_level": 3},
        quiet=True,
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.extra_compile_args.append("-O3")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
