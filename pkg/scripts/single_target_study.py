"""Steady-state behaviour of one filtered target: where cardinality errors come from.

Splits post burn-in frames into undercounts (with the detector miss that
caused them) and overcounts, and reports the RMS centroid error.
"""
import argparse

import numpy as np

from ntype_phd.config import config_from_dict
from ntype_phd.phd import NTypeGMPHD
from ntype_phd.sim import simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--burn-in", type=int, default=10)
    args = ap.parse_args()
    print("seed  exact  under  (missed det)  over  rms px")
    for seed in range(args.seeds):
        cfg = config_from_dict({"preset": "single", "seed": seed})
        truth, dets = simulate(cfg.scenario)
        filt = NTypeGMPHD(cfg.model.to_filter_config())
        under = over = exact = under_missed = 0
        sq = []
        for k, (gt, fr) in enumerate(zip(truth, dets)):
            est = filt.step([f.stripped() for f in fr])[0]
            if k < args.burn_in:
                continue
            missed = not any(t.startswith("true") for t in fr[0].provenance)
            exact += len(est) == len(gt)
            under += len(est) < len(gt)
            under_missed += len(est) < len(gt) and missed
            over += len(est) > len(gt)
            if est:
                sq.append(min(float(np.sum((e.centroid - gt.objects[0].centroid) ** 2)) for e in est))
        n = len(truth) - args.burn_in
        print(f"{seed:4d}  {exact / n:5.2f}  {under:5d}  ({under_missed:3d})        {over:4d}  {np.sqrt(np.mean(sq)):6.2f}")


if __name__ == "__main__":
    main()
