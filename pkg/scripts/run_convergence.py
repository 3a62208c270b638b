"""Convergence experiments: rho(CES, Leontief), CES utility convergence, range collapse.

Each table is written as CSV under --outdir.
"""

import argparse
import csv
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from integrability import Box, DemandSpec
from integrability.function_space import rho, rows_to_csv, utility_convergence_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="convergence_out")
    ap.add_argument("--nu-max", type=int, default=6)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    leontief = DemandSpec.leontief()
    D = Box.cube(0.5, 2.0, 2)

    with open(out / "rho_ces_leontief.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma", "rho", "truncation_bound"])
        for s in (-1, -2, -4, -8, -16):
            r = rho(DemandSpec.ces(s), leontief, args.nu_max)
            w.writerow([s, f"{r.rho:.12g}", f"{r.truncation_bound:.3g}"])
            print(f"sigma={s:>4}  rho={r.rho:.6f}")

    ks = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512]
    with ThreadPoolExecutor(args.threads) as pool:
        rows = utility_convergence_experiment([DemandSpec.ces(-1 - 1 / k) for k in ks], DemandSpec.ces(-1.0),
                                              [1.0, 1.0], D, args.points, ks, map_fn=pool.map)
        (out / "ces_utility_convergence.csv").write_text(rows_to_csv(rows))
        for r in rows:
            print(f"k={r.k:>4}  sup_error={r.sup_error:.3e}")

        sigmas = [-1.0, -2.0, -4.0, -8.0, -16.0]
        rows = utility_convergence_experiment([DemandSpec.ces(s) for s in sigmas], leontief,
                                              [1.0, 1.0], D, args.points, range(1, 6), map_fn=pool.map)
        (out / "range_collapse.csv").write_text(rows_to_csv(rows))
        for s, r in zip(sigmas, rows):
            print(f"sigma={s:>5}  diagonal sup_error={r.sup_error:.3e}  not_in_range={r.not_in_range_count}")


if __name__ == "__main__":
    main()
