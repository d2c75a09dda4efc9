"""From an ellipsoid to a Poisson-bracket bound.

Computes both hat capacities of E(1, 2), checks that every closed orbit of
the profile Hamiltonian inside the unit ball sits below index -n, and feeds
the capacity into the pb lower bound.
"""

import math

from symindex.convexbody import (
    Ellipsoid,
    ProfileChi,
    capacity_hat,
    capacity_hat0,
    pb_lower_bound,
    spec_window_report,
)


def main():
    E = Ellipsoid((1.0, 2.0))
    c, c0 = capacity_hat(E).value, capacity_hat0(E).value
    print(f"E(1,2): C_hat = {c / math.pi:.6f} pi, C_hat0 = {c0 / math.pi:.6f} pi")

    ball = Ellipsoid((1.0,))
    rep = spec_window_report(ball, ProfileChi(2.0, 0.1), kappa=0.0, delta=0.005)
    print("closed orbits of chi o f_delta on the unit disc:")
    for e in rep.entries:
        if e.periodic:
            print(f"  u={e.level:.4f}  action={e.action:+.5f}  max_cz={e.max_cz}  {e.label}")
    print("all inside orbits below -n:", rep.ok)

    pb = pb_lower_bound(1, c, cap_over_pi=4)
    print(f"pb bound for d=1 with cap C_hat(E(1,2)): {pb.value:.6g} = {pb.exact}")


if __name__ == "__main__":
    main()
