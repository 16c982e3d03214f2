#!/usr/bin/env python3
"""Cut the bundled grayscale fixture corpus from scikit-image sample data.

Every source image used here is CC0 or public domain (see data/README.md).
Output: data/train/*.pgm (136x136), data/test/*.pgm (128x128) and manifests.
"""
import os

import numpy as np
import skimage.data as sd
from skimage.color import rgb2gray
from skimage.transform import resize

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")

TRAIN = ["astronaut", "coffee", "brick", "grass", "gravel", "rocket",
         "hubble_deep_field", "retina", "cell", "immunohistochemistry"]
TEST = [("camera", 0), ("camera", 1), ("coins", 0), ("chelsea", 0), ("clock", 0), ("text", 0)]


def gray(name):
    im = getattr(sd, name)()
    if im.ndim == 3:
        im = rgb2gray(im[..., :3])
    else:
        im = im.astype(np.float64) / 255.0
    return im


def crops(im, size, count, scale):
    h, w = im.shape
    im = resize(im, (int(h * scale), int(w * scale)), anti_aliasing=True)
    h, w = im.shape
    out = []
    ys = np.linspace(0, h - size, count + 2)[1:-1].astype(int) if count > 1 else [(h - size) // 2]
    xs = np.linspace(0, w - size, count + 2)[1:-1].astype(int) if count > 1 else [(w - size) // 2]
    for y, x in zip(ys, xs[::-1] if count > 1 else xs):
        out.append(im[y:y + size, x:x + size])
    return out


def write_pgm(path, im):
    b = np.clip(np.round(im * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (b.shape[1], b.shape[0]))
        f.write(b.tobytes())


def main():
    for sub in ("train", "test"):
        os.makedirs(os.path.join(ROOT, sub), exist_ok=True)
    names = []
    for name in TRAIN:
        im = gray(name)
        scale = 272.0 / min(im.shape)
        for i, c in enumerate(crops(im, 136, 2, scale)):
            fn = "%s_%d.pgm" % (name, i)
            write_pgm(os.path.join(ROOT, "train", fn), c)
            names.append("train/" + fn)
    with open(os.path.join(ROOT, "train.txt"), "w") as f:
        f.write("# desk-scale training corpus (20 images, 136x136)\n")
        f.write("\n".join(names) + "\n")
    names = []
    for name, idx in TEST:
        im = gray(name)
        scale = 256.0 / min(im.shape)
        c = crops(im, 128, 2, scale)[idx]
        fn = "%s_%d.pgm" % (name, idx)
        write_pgm(os.path.join(ROOT, "test", fn), c)
        names.append("test/" + fn)
    with open(os.path.join(ROOT, "test.txt"), "w") as f:
        f.write("# held-out evaluation images (128x128)\n")
        f.write("\n".join(names) + "\n")


if __name__ == "__main__":
    main()
