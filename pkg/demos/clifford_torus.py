"""The special fiber of CP^n and the constant index-corrected action.

The fiber point comes out of fixed-point weight data alone and lands on the
barycenter of the moment simplex, the image of the Clifford torus.  The
index-corrected action of a linear Hamiltonian then takes the same value at
every fixed point.
"""

import numpy as np

from symindex.toric import projective_space, special_fiber_point, tilde_action


def main():
    for n in (1, 2, 3):
        model = projective_space(n)
        sf = special_fiber_point(model)
        print(f"CP^{n}: p_star = {np.round(sf.point, 12)}, residual {sf.residual:.1e}")
        m, N = np.arange(1, n + 1), 2
        vals = [tilde_action(model, 0.0, m, N, j) for j in range(n + 1)]
        want = sf.point @ m / N + n / model.kappa
        print(f"  tilde action for slope {m}/{N}: {np.round(vals, 12)} (expected {want:.12f})")


if __name__ == "__main__":
    main()
