"""Print the leading-order error ratios, the C_k constants and the slope errors for F[3,3,8]."""

import argparse

import numpy as np

from artifact import manifold, plmap, sectors, shrink
from artifact.scan import KNOWN_POINTS
from artifact.symbolic import RotationalParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--theta", type=float, nargs="*", default=[5.3, 5.63, 5.9])
    ap.add_argument("--k-max", type=int, default=8)
    args = ap.parse_args()

    data = shrink.locate(plmap.get_slice("bcnf3-fig1"), RotationalParams(3, 3, 8), KNOWN_POINTS["3,3,8"])
    polar = sectors.PolarFrame(data)
    ks = list(range(2, args.k_max + 1))
    np.set_printoptions(precision=4, suppress=False)
    for th in args.theta:
        ray = manifold.leading_order_ray(data, polar, th)
        print(f"# theta = {th}")
        for name in ray.errors:
            print(f"ratio,{name}," + ",".join(f"{v:.3f}" for v in ray.ratios(name)))
        C = manifold.boundary_fixed_point_constants(data, polar, th, ks)
        print("C_k," + ",".join(f"{v:.4f}" for v in C))
    for k, (e_l, e_r) in zip(ks, manifold.slope_errors(data, polar, ks)):
        print(f"slope_error,{k},{e_l:.5f},{e_r:.5f}")


if __name__ == "__main__":
    main()
