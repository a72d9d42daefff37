from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def write_labels_pgm(path: Path, labels: np.ndarray) -> Path:
    """Binary PGM with one gray level per domain and 0 for the nodal set.

    Image rows run from the top of the torus (largest y) down; columns follow x.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = np.asarray(labels)
    nx, ny = labels.shape
    maxval = max(int(labels.max(initial=0)), 1)
    if maxval > 65535:
        raise ValueError(f"{maxval} domains do not fit a 16-bit PGM")
    image = np.flipud(labels.T)
    dtype = ">u1" if maxval <= 255 else ">u2"
    with path.open("wb") as handle:
        handle.write(f"P5\n{nx} {ny}\n{255 if maxval <= 255 else 65535}\n".encode("ascii"))
        handle.write(np.ascontiguousarray(image, dtype=dtype).tobytes())
    return path


def write_labels_csv(path: Path, labels: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = np.asarray(labels)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["ix", "iy", "label"])
        for (ix, iy), label in np.ndenumerate(labels):
            writer.writerow([ix, iy, int(label)])
    return path
