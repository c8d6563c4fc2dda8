"""Builds the extension with cargo and copies it next to this script.

Use `maturin develop -m crates/python/Cargo.toml` instead when maturin is
available.
"""

import pathlib
import shutil
import subprocess
import sys
import sysconfig

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    cmd = [
        "cargo", "build", "--release", "-p", "mimo-rgd-python",
        "--features", "extension-module", *sys.argv[1:],
    ]
    subprocess.run(cmd, cwd=ROOT, check=True)
    built = ROOT / "target" / "release" / (
        "mimo_rgd_py.dll" if sys.platform == "win32"
        else "libmimo_rgd_py.dylib" if sys.platform == "darwin"
        else "libmimo_rgd_py.so"
    )
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    target = pathlib.Path(__file__).resolve().parent / f"mimo_rgd_py{suffix}"
    shutil.copyfile(built, target)
    print(target)


if __name__ == "__main__":
    main()
