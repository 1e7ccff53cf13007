"""Stable leaf of the conjugated saddle, computed three ways.

The toy system is a linear saddle seen through a nonlinear change of
coordinates, so its leaves are known exactly.  SIMP and SIMPGS errors stop
falling once the quadrature error is reached; PWCONST halves its error per
refinement and the vector Aitken sequence removes most of the remainder.
"""

from __future__ import annotations

from foliate.experiments import toy_stable_leaf


def main():
    for initial in ("exponential", "constant"):
        out = toy_stable_leaf(initial=initial)
        print(f"first guess: {initial}")
        print(f"  leaf height at x = {out.summary['x']:.6f}: {out.summary['exact_y']:.10f}")
        print("   j   err SIMP    err SIMPGS")
        for j, es, eg, *_ in out.tables["simp"].rows:
            print(f"  {int(j):2d}   {es:.3e}   {eg:.3e}")
    print("\nPWCONST refinements and their Aitken extrapolation")
    print("   j   h_j      err PWCONST   err Aitken")
    for j, hj, _, ep, ea in out.tables["pwconst_aitken"].rows:
        print(f"  {int(j):2d}   {hj:<7.4g}  {ep:.3e}     {ea:.3e}")


if __name__ == "__main__":
    main()
