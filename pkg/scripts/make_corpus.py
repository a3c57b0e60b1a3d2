"""Regenerate data/corpus/*.ppm from scikit-image's bundled photographs.

Each photo is center-cropped to 192x128 (the 3:2 Kodak aspect) at native
resolution, so neighbouring-pixel statistics stay those of a full-size
photograph. Output is deterministic.
"""

import pathlib
import sys

import numpy as np
import skimage.data

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))
from simcom.workloads import BitmapImage, save_ppm  # noqa: E402

PHOTOS = ("astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry", "retina")
W, H = 192, 128


def crop(arr):
    h, w = arr.shape[:2]
    y0, x0 = (h - H) // 2, (w - W) // 2
    return np.ascontiguousarray(arr[y0:y0 + H, x0:x0 + W]).astype(np.uint8)


def main(out="data/corpus"):
    d = pathlib.Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name in PHOTOS:
        arr = crop(getattr(skimage.data, name)()[..., :3])
        save_ppm(BitmapImage.from_array(arr), d / f"{name}.ppm")
        print(d / f"{name}.ppm")


if __name__ == "__main__":
    main(*sys.argv[1:])
