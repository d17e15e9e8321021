"""Monte-Carlo comparison of raw detections, independent filters and the N-type filter.

    python scripts/compare_methods.py --preset football3 --replicates 20 --out runs/compare
"""
import argparse
import json
import logging
from pathlib import Path

from ntype_phd.config import config_from_dict
from ntype_phd.runner import compare_methods


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="football3")
    ap.add_argument("--replicates", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="write per-replicate outputs here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = config_from_dict({"preset": args.preset, "seed": args.seed, "replicates": args.replicates, "mode": "compare"})
    res = compare_methods(cfg, out=None if args.out is None else Path(args.out))
    print(f"{args.preset}, {res['replicates']} replicates")
    print(f"{'method':<12} {'card err':>9} {'OSPA':>9} {'ms/frame':>9} {'disc':>7}")
    for mode, row in res["methods"].items():
        print(f"{mode:<12} {row['mean_card_err']:9.3f} {row['mean_ospa']:9.3f} {1e3 * row['time_per_frame']:9.2f} {row['discrimination_rate']:7.3f}")
    print("one-sided sign tests:", json.dumps(res["sign_tests"], indent=1))


if __name__ == "__main__":
    main()
