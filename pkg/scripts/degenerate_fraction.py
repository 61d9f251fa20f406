"""Fraction of sampled matrices in the degenerate set, generic symplectic vs R-reversible.

    python scripts/degenerate_fraction.py --samples 2000
"""
import argparse

import numpy as np

from roundtrip import io as rio
from roundtrip.sympmat import R0, R1, classify_upsilon, random_symplectic, sample_r_reversible


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--k-max", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="degenerate_fraction.csv")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    rows = []
    for d in args.dims:
        families = {
            "symplectic": [random_symplectic(d, rng) for _ in range(args.samples)],
            "R0_reversible": sample_r_reversible(R0(d), args.samples, int(rng.integers(2**31))),
            "R1_reversible": sample_r_reversible(R1(d), args.samples, int(rng.integers(2**31))),
        }
        for name, mats in families.items():
            v = [classify_upsilon(M, k_max=args.k_max) for M in mats]
            frac = float(np.mean([x.in_upsilon for x in v]))
            gap = float(np.median([x.min_eigenvalue_gap for x in v]))
            rows.append({"d": d, "family": name, "samples": args.samples, "fraction": frac,
                         "median_gap": gap})
            print(f"d={d} {name:<14} fraction={frac:.4f} median gap={gap:.3g}")
    rio.write_dict_rows(args.out, rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
