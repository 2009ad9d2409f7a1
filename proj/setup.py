"""Build the ddd._core pybind11 extension through the project's CMake tree."""

import os
import subprocess
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        extdir = os.path.abspath(os.path.dirname(self.get_ext_fullpath(ext.name)))
        build_dir = os.path.abspath(self.build_temp)
        os.makedirs(build_dir, exist_ok=True)
        source_dir = os.path.abspath(os.path.dirname(__file__))
        cmake_args = [
            "-DCMAKE_BUILD_TYPE=Release",
            "-DDDD_BUILD_PYTHON=ON",
            "-DDDD_BUILD_TESTS=OFF",
            "-DDDD_BUILD_CLI=OFF",
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={extdir}",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(["cmake", source_dir, *cmake_args], cwd=build_dir, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core", "--parallel"],
            cwd=build_dir,
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("ddd._core")],
    cmdclass={"build_ext": CMakeBuild},
)
