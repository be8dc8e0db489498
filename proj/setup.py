"""Build the pybind11 extension through the project's CMake tree.

The extension `_warfarin_core` is produced by CMake (so the python module and
the CLI share one compiled core). This setup drives a CMake configure+build
from build_ext, then copies the module where setuptools expects it.
Editable installs: pip install -e . --no-build-isolation
"""

import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name: str):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext: CMakeExtension) -> None:
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        out_dir.mkdir(parents=True, exist_ok=True)

        cfg = "Debug" if self.debug else "Release"
        configure = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            f"-DCMAKE_BUILD_TYPE={cfg}",
            "-DWARFARIN_BUILD_TESTS=OFF",
            "-DWARFARIN_BUILD_PYTHON=ON",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(configure, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_warfarin_core",
             "-j", str(os.cpu_count() or 2)],
            check=True,
        )

        built = sorted(build_dir.glob("_warfarin_core*.so")) or sorted(
            build_dir.glob("**/_warfarin_core*.so")
        )
        if not built:
            raise RuntimeError("CMake build did not produce _warfarin_core")
        shutil.copy2(built[0], Path(self.get_ext_fullpath(ext.name)))


setup(
    ext_modules=[CMakeExtension("_warfarin_core")],
    cmdclass={"build_ext": CMakeBuild},
)
