"""Write a synthetic clean test set (PNGs + index.csv) that `medcorrupt corrupt` can consume."""

import argparse

from medcorrupt.registry import default_registry
from medcorrupt.synthetic import write_image_folder


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("output")
    ap.add_argument("--dataset", default="octmnist", help="takes channel count and class count from this profile")
    ap.add_argument("-n", "--images", type=int, default=10)
    ap.add_argument("--size", type=int, default=224)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    profile = default_registry().profile(args.dataset)
    rows = write_image_folder(args.output, args.images, args.size, profile.channels, args.seed, profile.n_classes)
    print(f"wrote {len(rows)} {profile.channels}-channel images and index.csv to {args.output}")


if __name__ == "__main__":
    main()
