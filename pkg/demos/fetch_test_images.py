"""
Fetch the standard 256x256 test images
======================================

The denoising benchmarks use the classic 256x256 grayscale "Cameraman",
"House" and "Peppers" images. They are not redistributed with this
repository. This script places them in ``data/`` (or ``$SPFREG_IMAGE_DIR``)
as 8-bit PGM files.

* Cameraman comes from the source distribution of the ``bm3d`` package on
  PyPI (``examples/cameraman256.png``), fetched with ``pip download``.
* House and Peppers are not shipped by any PyPI package we know of. Copy
  them in by hand, e.g. from the Set12 denoising set (``02.png`` is House,
  ``03.png`` is Peppers), passing their paths with ``--house`` and
  ``--peppers``.

Run::

    python demos/fetch_test_images.py [--house PATH] [--peppers PATH]
"""

import argparse
import io
import subprocess
import sys
import tarfile
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from spfreg.imaging import ImageGray, image_dir, write_pgm


def fetch_cameraman(dest: Path) -> Path:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--no-binary", ":all:",
             "--no-build-isolation", "-q", "bm3d==4.0.3", "-d", tmp],
            check=True,
        )
        (sdist,) = Path(tmp).glob("bm3d-*.tar.gz")
        with tarfile.open(sdist) as tar:
            member = next(m for m in tar.getmembers() if m.name.endswith("cameraman256.png"))
            raw = tar.extractfile(member).read()
    img = np.asarray(Image.open(io.BytesIO(raw)).convert("L"), dtype=np.float64)
    out = dest / "cameraman.pgm"
    write_pgm(ImageGray(img), out)
    return out


def convert(src: str, dest: Path, name: str) -> Path:
    img = np.asarray(Image.open(src).convert("L"), dtype=np.float64)
    if img.shape != (256, 256):
        print(f"warning: {name} has shape {img.shape}, expected (256, 256)")
    out = dest / f"{name}.pgm"
    write_pgm(ImageGray(img), out)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--dest", type=Path, default=None)
    ap.add_argument("--house", help="path to a 256x256 House image")
    ap.add_argument("--peppers", help="path to a 256x256 Peppers image")
    args = ap.parse_args(argv)
    dest = args.dest or image_dir()
    dest.mkdir(parents=True, exist_ok=True)
    if not (dest / "cameraman.pgm").exists():
        print("wrote", fetch_cameraman(dest))
    for name in ("house", "peppers"):
        src = getattr(args, name)
        if src:
            print("wrote", convert(src, dest, name))
        elif not (dest / f"{name}.pgm").exists():
            print(f"{name}: not available, pass --{name} PATH")


if __name__ == "__main__":
    main()
