#!/usr/bin/env python3
"""Builds the desk-scale digit dataset shipped under data/digits28/.

Takes the 1797 handwritten 8x8 digits bundled with scikit-learn, upscales
them to 28x28 with bilinear interpolation, and writes a stratified
train/test split in the standard IDX (MNIST file) layout:

    train-images-idx3-ubyte   train-labels-idx1-ubyte
    t10k-images-idx3-ubyte    t10k-labels-idx1-ubyte

The test split is untouched originals. The training split is enriched with
one-pixel translations applied at the native 8x8 resolution (before
upscaling), which stands in for the size of a real training corpus at desk
scale. Regeneration is deterministic; the output is committed so the C++
test suite has no Python dependency.
"""
import struct
import sys
from pathlib import Path

import numpy as np
from PIL import Image
from sklearn.datasets import load_digits

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/digits28")
TEST_PER_CLASS = 60
SEED = 20240
SIZE = 28
SHIFTS = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]


def upscale(img8: np.ndarray) -> np.ndarray:
    return np.asarray(Image.fromarray(img8).resize((SIZE, SIZE), Image.BILINEAR))


def shifted(img8: np.ndarray, dr: int, dc: int) -> np.ndarray:
    out = np.zeros_like(img8)
    src_r = slice(max(0, -dr), img8.shape[0] - max(0, dr))
    dst_r = slice(max(0, dr), img8.shape[0] - max(0, -dr))
    src_c = slice(max(0, -dc), img8.shape[1] - max(0, dc))
    dst_c = slice(max(0, dc), img8.shape[1] - max(0, -dc))
    out[dst_r, dst_c] = img8[src_r, src_c]
    return out


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    x, y = load_digits(return_X_y=True)
    x = (x.reshape(-1, 8, 8) * (255.0 / 16.0)).clip(0, 255).astype(np.uint8)

    rng = np.random.RandomState(SEED)
    test_idx = []
    for c in range(10):
        members = np.flatnonzero(y == c)
        test_idx.extend(rng.permutation(members)[:TEST_PER_CLASS])
    test_mask = np.zeros(len(y), dtype=bool)
    test_mask[np.asarray(test_idx)] = True

    train_images, train_labels = [], []
    for img8, label in zip(x[~test_mask], y[~test_mask]):
        for dr, dc in SHIFTS:
            train_images.append(upscale(shifted(img8, dr, dc)))
            train_labels.append(label)
    order = rng.permutation(len(train_images))
    train_images = np.stack(train_images)[order]
    train_labels = np.asarray(train_labels)[order]

    test_images = np.stack([upscale(img8) for img8 in x[test_mask]])

    OUT.mkdir(parents=True, exist_ok=True)
    write_idx_images(OUT / "train-images-idx3-ubyte", train_images)
    write_idx_labels(OUT / "train-labels-idx1-ubyte", train_labels)
    write_idx_images(OUT / "t10k-images-idx3-ubyte", test_images)
    write_idx_labels(OUT / "t10k-labels-idx1-ubyte", y[test_mask])
    print(f"wrote {len(train_images)} train / {int(test_mask.sum())} test to {OUT}")


if __name__ == "__main__":
    main()
