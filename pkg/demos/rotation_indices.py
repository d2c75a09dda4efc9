"""Conley-Zehnder indices of planar rotations, two ways.

Each row compares the closed form for ``exp(-2 pi y J0 t)`` with the index
assembled from crossing forms of the graph path, and shows the max variant
(index plus half the fixed-space dimension).
"""

from fractions import Fraction

from symindex import cz_index, half_str, max_cz_index, rotation_cz
from symindex.czindex import rotation_path


def main():
    print(f"{'y':>6} {'closed':>7} {'crossings':>10} {'kernel':>7} {'max':>5}")
    for y in [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), 1, Fraction(3, 2), 2, Fraction(5, 2)]:
        cz, k = rotation_cz(y)
        path = rotation_path([float(y)])
        res = cz_index(path)
        print(f"{str(y):>6} {cz:>7} {half_str(res.value):>10} {res.kernel_dim:>7} "
              f"{half_str(max_cz_index(path)):>5}")


if __name__ == "__main__":
    main()
