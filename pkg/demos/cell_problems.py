"""Effective tensors of periodic microstructures, three ways.

laminate      closed form: harmonic mean across the layers, arithmetic
              along them
checkerboard  isotropic with the geometric mean of the two phases
random        no closed form, but always inside the mean bounds
"""

import numpy as np

from cloaksim import CellProblem, solve_cell


def laminate(p):
    return np.where(p[:, 0] % 1.0 < 0.5, 1.0, 4.0)


def checkerboard(p):
    same = ((p[:, 0] % 1.0) < 0.5) == ((p[:, 1] % 1.0) < 0.5)
    return np.where(same, 1.0, 4.0)


def main():
    sol = solve_cell(CellProblem(laminate, resolution=(64, 64)))
    print("laminate {1, 4}:")
    print(f"  tensor diag ({sol.tensor[0, 0]:.6f}, {sol.tensor[1, 1]:.6f})"
          "   expected (1.600000, 2.500000)")

    sol = solve_cell(CellProblem(checkerboard, resolution=(64, 64)))
    ev = np.linalg.eigvalsh(sol.tensor)
    print("checkerboard {1, 4}:")
    print(f"  eigenvalues ({ev[0]:.6f}, {ev[1]:.6f})"
          "   geometric mean 2, slight grid bias expected")

    rng = np.random.default_rng(1)
    print("random smooth cells, eigenvalues vs (harmonic, arithmetic):")
    for k in range(5):
        c = rng.uniform(-0.8, 0.8, size=3)

        def a(p, c=c):
            return np.exp(c[0] * np.sin(2 * np.pi * p[:, 0])
                          + c[1] * np.cos(2 * np.pi * p[:, 1]) + c[2])
        sol = solve_cell(CellProblem(a, resolution=(32, 32)))
        lo, hi = sol.bounds
        ev = np.linalg.eigvalsh(sol.tensor)
        inside = lo <= ev[0] and ev[1] <= hi
        print(f"  cell {k}: [{ev[0]:.4f}, {ev[1]:.4f}] in "
              f"[{lo:.4f}, {hi:.4f}]  {'ok' if inside else 'VIOLATION'}")


if __name__ == "__main__":
    main()
