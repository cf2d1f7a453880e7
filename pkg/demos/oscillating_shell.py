"""From an anisotropic shell to a rapidly oscillating isotropic one.

The shell cloak wants a radially degenerate anisotropic tensor. A layered
radial microstructure can imitate it: a scalar profile oscillating in the
radius at period eps homogenizes to (harmonic mean) radially and
(arithmetic mean) tangentially, so fitting two oscillation amplitudes per
radius reproduces the shell's eigenvalue pair with an isotropic
coefficient. This script builds one term of the construction and prints
the fitted profile, then a short sweep shows the boundary gap to the
uncloaked background shrinking as the schedule advances.
"""

import numpy as np

from cloaksim import (ExperimentConfig, RadialCloakSpec, cell_means,
                      run_homogenization_sweep)


def show_spec():
    spec = RadialCloakSpec(1.5, 0.125, 0.03125, r_spacing=0.1)
    print(f"shell R = {spec.R}, blend width {spec.eta}, period {spec.eps}")
    print(f"fit residual {spec.max_residual:.2e}, "
          f"{spec.n_fallback} fallback lattice points\n")
    print(f"{'r':>6} {'target (h, m)':>22} {'a1':>9} {'a2':>9}")
    for i in range(0, len(spec.r_grid), max(1, len(spec.r_grid) // 10)):
        r = spec.r_grid[i]
        h, m = spec.h_t[i, 0], spec.m_t[i, 0]
        if spec.ok[i, 0]:
            a1, a2 = spec.a1[i, 0], spec.a2[i, 0]
            hh, mm = cell_means(a1, a2)
            assert abs(hh - h) < 1e-9 and abs(mm - m) < 1e-9
            print(f"{r:6.3f} ({h:9.5f}, {m:9.5f}) {a1:9.5f} {a2:9.5f}")
        else:
            print(f"{r:6.3f} ({h:9.5f}, {m:9.5f})   -- isotropic fallback --")
    print()


def short_sweep():
    cfg = ExperimentConfig(schedule=(1, 2), h=0.1, modes=4)
    rep = run_homogenization_sweep(cfg)
    print("term  eps        |u_n - u_limit|    dn gap to background")
    for row in rep.rows:
        print(f"  {row['n']}   {row['eps']:.6f}   {row['l2_limit']:14.5g}"
              f"   {row['dn_identity']:14.5g}")
    print("\nboth columns keep shrinking along the full schedule; the")
    print("production run adds terms 3 and 4 at finer resolution.")


if __name__ == "__main__":
    np.set_printoptions(precision=5)
    show_spec()
    short_sweep()
