"""Update wall time against measurement count m, component count n and type count N.

Each point is the minimum over repeats of a single type's update.
"""
import argparse
import time

import numpy as np

from ntype_phd.frames import DetectionFrame
from ntype_phd.phd import FilterConfig, TypedIntensity, update
from ntype_phd.sim import Region


def time_update(m, n, N, rng, repeats):
    p_D = np.full((N, N), 0.1) + 0.8 * np.eye(N)
    cfg = FilterConfig.constant_velocity(N, 5.0, 6.0, p_D, 0.99, 10.0, Region().box())
    pred = []
    for i in range(N):
        A = rng.normal(0, 3, (n, 6, 6))
        pred.append(TypedIntensity(i, rng.uniform(0, 1, n), rng.uniform(0, 500, (n, 6)), A @ np.swapaxes(A, 1, 2) + 10 * np.eye(6)))
    frame = DetectionFrame(0, 0, rng.uniform(0, 500, (m, 4)))
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        update(pred[0], frame, pred, cfg)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    base = {"m": 40, "n": 60, "N": 3}
    for key in base:
        prev = None
        print(f"sweep {key} (others at base {base})")
        for factor in (1, 2, 4, 8):
            kw = dict(base, **{key: base[key] * factor})
            t = time_update(**kw, rng=rng, repeats=args.repeats)
            ratio = "" if prev is None else f"  x{t / prev:.2f}"
            print(f"  {key}={kw[key]:5d}  {1e3 * t:8.3f} ms{ratio}")
            prev = t


if __name__ == "__main__":
    main()
