"""Images per second for every corruption kernel on 224x224 inputs (single core)."""

import argparse
import json
import time

from medcorrupt.core import derive_stream
from medcorrupt.kernels import KERNELS, apply
from medcorrupt.registry import default_registry
from medcorrupt.synthetic import synthetic_batch

BLUR = {"gaussian_blur", "defocus_blur", "motion_blur", "zoom_blur"}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--images", type=int, default=20, help="images per (kernel, severity)")
    ap.add_argument("--size", type=int, default=224)
    ap.add_argument("--channels", type=int, choices=(1, 3), default=3)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    args = ap.parse_args()

    registry = default_registry()
    imgs = synthetic_batch(args.images, args.size, args.channels, seed=1)
    results = {}
    for cid, kernel in KERNELS.items():
        if kernel.rgb_only and args.channels != 3:
            continue
        per_severity = []
        for s in range(1, 6):
            start = time.perf_counter()
            for i, img in enumerate(imgs):
                apply(img, cid, s, derive_stream(0, "bench", cid, s, i), registry)
            per_severity.append(len(imgs) / (time.perf_counter() - start))
        need = 10 if cid in BLUR else 50
        results[cid] = {"per_severity": per_severity, "min": min(per_severity), "threshold": need}

    if args.json:
        print(json.dumps(results, indent=2))
        return
    print(f"{'corruption':<16}{'min img/s':>10}  {'s1..s5':<40} bar")
    for cid, r in results.items():
        flag = "ok" if r["min"] >= r["threshold"] else "SLOW"
        row = " ".join(f"{v:6.0f}" for v in r["per_severity"])
        print(f"{cid:<16}{r['min']:>10.1f}  {row:<40} >={r['threshold']} {flag}")


if __name__ == "__main__":
    main()
