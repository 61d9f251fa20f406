"""Reversibility identity and turning-point antisymplecticity across double-well parameters.

    python scripts/reversibility_sweep.py --out sweep.csv
"""
import argparse
import itertools

import numpy as np

from roundtrip import io as rio
from roundtrip.orbits import find_periodic_orbit
from roundtrip.reduced import check_reversible_orbit
from roundtrip.systems import build_system, recommended_seed


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--omegas", type=float, nargs="+", default=[0.9, 1.3, 1.7])
    ap.add_argument("--couplings", type=float, nargs="+", default=[0.0, 0.3])
    ap.add_argument("--energies", type=float, nargs="+", default=[0.3, 0.8, 1.5])
    ap.add_argument("--out", default="reversibility_sweep.csv")
    args = ap.parse_args(argv)
    rows = []
    for w, c, e in itertools.product(args.omegas, args.couplings, args.energies):
        params = {"omega": w, "coupling": c, "energy": e}
        H, u = build_system("double_well", params)
        x0, T = recommended_seed("double_well", params)
        orbit = find_periodic_orbit(H, u, x0, T)
        v = check_reversible_orbit(H, u, orbit)
        rows.append({"omega": w, "coupling": c, "energy": e, "period": orbit.period,
                     "identity_residual": v.identity_residual,
                     "antisymplectic_max": max(v.antisymplectic_residuals),
                     "half_period_offset": v.half_period_offset,
                     "multipliers_abs": float(np.max(np.abs(np.linalg.eigvals(v.return_map))))})
        print(f"omega={w:<4} coupling={c:<4} energy={e:<4} identity={v.identity_residual:.2e}")
    rio.write_dict_rows(args.out, rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
