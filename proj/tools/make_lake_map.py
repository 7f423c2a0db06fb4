#!/usr/bin/env python3
"""Synthetic 500 x 500 m lake used by scenarios/table8.scn.

Water is 1, land is 0 (P2 graymap, maxval 1, 1 m/cell, origin 0 0).
The west shore has a peninsula reaching east across the start-goal line.
"""
import argparse

import numpy as np


def build(size=500, tip_x=268.0, neck_y=205.0, half_width=22.0):
    y, x = np.mgrid[0:size, 0:size].astype(float)
    land = x < 95.0 + 15.0 * np.sin(y / 40.0)
    land |= y > 455.0 + 10.0 * np.sin(x / 55.0)
    # peninsula: capsule from the west shore to the tip
    px = np.clip(x, 60.0, tip_x - half_width)
    land |= np.hypot(x - px, y - neck_y) < half_width
    land |= np.hypot(x - 170.0, y - 70.0) < 38.0
    land |= np.hypot(x - 430.0, y - 340.0) < 28.0
    return land


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("output")
    ap.add_argument("--tip-x", type=float, default=268.0)
    args = ap.parse_args()
    land = build(tip_x=args.tip_x)
    h, w = land.shape
    with open(args.output, "w") as f:
        f.write("P2\n# geometry 1 0 0\n")
        f.write(f"{w} {h}\n1\n")
        for row in land[::-1]:
            f.write(" ".join("0" if v else "1" for v in row))
            f.write("\n")


if __name__ == "__main__":
    main()
