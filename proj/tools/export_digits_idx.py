#!/usr/bin/env python3
"""Export the scikit-learn handwritten digits as IDX image/label files.

Produces a small MNIST-shaped corpus (8x8 grayscale, classes 0..9) with
equal per-class counts: 130 train and 44 test images per class. The split
is seeded, so repeated runs write byte-identical files.
"""

import os
import struct
import sys

import numpy as np
from sklearn.datasets import load_digits

TRAIN_PER_CLASS = 130
TEST_PER_CLASS = 44
SPLIT_SEED = 20240817


def write_idx_images(path, images):
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "."
    os.makedirs(out_dir, exist_ok=True)

    digits = load_digits()
    # Pixel values are 0..16; stretch to the usual 0..255 byte range.
    images = np.round(digits.images * 255.0 / 16.0).astype(np.uint8)
    labels = digits.target

    rng = np.random.default_rng(SPLIT_SEED)
    train_idx, test_idx = [], []
    need = TRAIN_PER_CLASS + TEST_PER_CLASS
    for k in range(10):
        members = np.flatnonzero(labels == k)
        members = members[rng.permutation(len(members))]
        if len(members) < need:
            raise SystemExit(f"class {k} has {len(members)} images, need {need}")
        train_idx.extend(members[:TRAIN_PER_CLASS])
        test_idx.extend(members[TRAIN_PER_CLASS:need])

    train_idx = np.array(sorted(train_idx))
    test_idx = np.array(sorted(test_idx))

    write_idx_images(os.path.join(out_dir, "train-images-idx3-ubyte"), images[train_idx])
    write_idx_labels(os.path.join(out_dir, "train-labels-idx1-ubyte"), labels[train_idx])
    write_idx_images(os.path.join(out_dir, "t10k-images-idx3-ubyte"), images[test_idx])
    write_idx_labels(os.path.join(out_dir, "t10k-labels-idx1-ubyte"), labels[test_idx])
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test digits to {out_dir}")


if __name__ == "__main__":
    main()
