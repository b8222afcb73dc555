#!/usr/bin/env python3
"""Writes a small 28x28 digit CSV (label, then 784 pixel intensities 0-255).

With --mnist PATH (an mnist.npz as distributed with Keras) the images are drawn
from its training split. Without it, the 8x8 handwritten digits bundled with
scikit-learn are upscaled to a 20x20 box and centred on a 28x28 canvas, which
is how the original 28x28 images were laid out.
"""
import argparse

import numpy as np
from PIL import Image


def upscaled_sklearn_digits():
    from sklearn.datasets import load_digits

    digits = load_digits()
    out = np.zeros((len(digits.images), 28, 28), dtype=np.uint8)
    for k, img in enumerate(digits.images):
        small = Image.fromarray((img / 16.0 * 255.0).astype(np.uint8))
        big = np.array(small.resize((20, 20), Image.BILINEAR))
        big[big < 96] = 0  # faint interpolation halo; keeps strokes sparse
        out[k, 4:24, 4:24] = big
    return out.reshape(len(out), 784), digits.target


def mnist_npz(path):
    with np.load(path) as f:
        return f["x_train"].reshape(-1, 784), f["y_train"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mnist", help="mnist.npz with x_train / y_train")
    ap.add_argument("--labels", default="0,3")
    ap.add_argument("--per-label", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", default="data/digits_subset.csv")
    args = ap.parse_args()

    pixels, labels = mnist_npz(args.mnist) if args.mnist else upscaled_sklearn_digits()
    rng = np.random.default_rng(args.seed)
    rows = []
    for lab in (int(v) for v in args.labels.split(",")):
        idx = np.flatnonzero(labels == lab)
        pick = rng.choice(idx, size=min(args.per_label, len(idx)), replace=False)
        rows.extend((lab, pixels[i]) for i in sorted(pick))
    with open(args.output, "w") as f:
        for lab, px in rows:
            f.write(str(lab) + "," + ",".join(str(int(v)) for v in px) + "\n")


if __name__ == "__main__":
    main()
