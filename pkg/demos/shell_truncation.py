"""Visibility of the truncated shell construction.

The exact shell tensor is degenerate at the inner rim, so any computation
works with a truncation: outside radius rho the exact push-forward, inside
it the rim values carried inward, and a strongly nonlinear load hiding in
the unit disk. The only honest question is what the boundary sees. The
printout tracks the weighted operator gap to the background as rho drops;
it should fall roughly linearly in (rho - 1).
"""

import sys

from cloaksim import ExperimentConfig, run_truncated_singular_sweep


def main(h=0.1):
    cfg = ExperimentConfig(schedule=(1.5, 1.25, 1.1), h=h, modes=4,
                           inclusion="sin-5I")
    rep = run_truncated_singular_sweep(cfg)
    print(f"{'rho':>6} {'dn gap':>12} {'vertices':>10}")
    for row in rep.rows:
        print(f"{row['rho']:6.2f} {row['dn']:12.5g} {row['n_vertices']:10d}")
    first, last = rep.rows[0]["dn"], rep.rows[-1]["dn"]
    print(f"\nfinal gap is {100 * last / first:.1f}% of the first; the load")
    print("inside the unit disk is (2 + sin u) * 5I and never touches the")
    print("measurements beyond this vanishing remainder.")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.1)
