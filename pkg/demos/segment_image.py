"""End-to-end segmentation round trip on a synthetic image.

Creates a 256x256 test image (a bright disc on a dark textured ground),
runs it through a random-weight model in train and deploy modes, writes
both predicted masks as P5 files, and scores them against each other.
With random weights the masks are meaningless; the point is to exercise
the full image -> normalize -> forward -> threshold -> mask -> metrics
pipeline in a handful of lines. Files land in the directory given as the
only argument (default: the working directory).

    python3 demos/segment_image.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from lvunet import (
    build,
    dice_score,
    forward,
    iou,
    normalize,
    read_image,
    sigmoid,
    to_deploy,
    write_pgm_mask,
)


def synthetic_ppm(path):
    rng = np.random.default_rng(11)
    yy, xx = np.mgrid[0:256, 0:256]
    disc = ((yy - 128) ** 2 + (xx - 128) ** 2) < 70 ** 2
    base = rng.integers(20, 80, size=(256, 256, 3), dtype=np.int64)
    base[disc] = rng.integers(170, 230, size=(int(disc.sum()), 3))
    with open(path, "wb") as f:
        f.write(b"P6\n256 256\n255\n")
        f.write(base.astype(np.uint8).tobytes())


def predict(model, x, slope=1.0):
    prob = sigmoid(forward(model, x, slope=slope))
    return prob[0, 0] > 0.5


def main():
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)

    image_path = outdir / "disc.ppm"
    synthetic_ppm(image_path)
    print(f"wrote {image_path}")

    x = normalize(read_image(image_path))
    model = build("II", series_n=1, num_classes=1, seed=5)
    deployed, _ = to_deploy(model)

    train_mask = predict(model, x)
    deploy_mask = predict(deployed, x)
    write_pgm_mask(train_mask, outdir / "mask_train.pgm")
    write_pgm_mask(deploy_mask, outdir / "mask_deploy.pgm")
    print(f"wrote {outdir / 'mask_train.pgm'} and {outdir / 'mask_deploy.pgm'}")

    print(f"train-mode foreground: {100 * train_mask.mean():.1f}%")
    print(f"agreement between modes: IoU {iou(train_mask, deploy_mask):.4f}, "
          f"Dice {dice_score(train_mask, deploy_mask):.4f}")


if __name__ == "__main__":
    main()
