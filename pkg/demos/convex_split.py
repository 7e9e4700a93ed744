"""The convex-split trick: hiding one correlated register among decoys.

Take a state rho on registers P and Q and a decoy state sigma on Q. Mix the
n placements "rho in slot j, decoys everywhere else". With enough slots the
mixture becomes almost indistinguishable from the full product
rho_P (x) sigma^n, and sqrt(2^k / n) bounds the purified distance, where k is
the max-divergence between rho and rho_P (x) sigma. This is the engine behind
the encoder steps of every protocol in this package.

Run it:
    python3 demos/convex_split.py
"""

import math

import numpy as np

import qoneshot as q


def bell_decoys():
    bell = q.maximally_entangled(2, "P", "Q").density()
    half = q.DensityOperator(np.eye(2) / 2.0, q.RegisterLayout(("Q",), (2,)))
    print("Bell pair hidden among maximally mixed decoys (k = 2 bits)")
    print("   n    exact distance   bound sqrt(2^k/n)   route")
    for n in (4, 8, 16, 32, 64, 256, 1024):
        cs = q.build_convex_split(bell, half, ["P"], n, want_purification=False)
        print(f"  {n:4d}   {cs.exact_distance:.6f}         {cs.declared_bound:.6f}"
              f"          {cs.route}")
    # the dense route materializes the mixture; past the dimension guard a
    # closed form over collective-spin sectors takes over, exactly
    print()


def classical_large_n():
    d = 8
    mat = np.zeros((d * d, d * d))
    for i in range(d):
        mat[i * d + i, i * d + i] = 1.0 / d
    rho = q.DensityOperator(mat, q.RegisterLayout(("P", "Q"), (d, d)))
    sig = q.DensityOperator(np.eye(d) / d, q.RegisterLayout(("Q",), (d,)))
    print("perfectly correlated classical pair, d = 8 (k = 3 bits)")
    for n in (512, 4096, 16384):
        cs = q.build_convex_split(rho, sig, ["P"], n, want_purification=False)
        print(f"  n={n:5d}   distance {cs.exact_distance:.6f}"
              f"   bound {cs.declared_bound:.6f}   ({cs.route})")
    print()


def bipartite_grid():
    # both sides split at once: n copies on P, m copies on Q, mixed over the
    # n*m grid positions, against sqrt(2^k / (n m)) with k the max-mutual
    # divergence of rho
    mat = np.zeros((4, 4))
    mat[0, 0] = mat[3, 3] = 0.5
    rho = q.DensityOperator(mat, q.RegisterLayout(("P", "Q"), (2, 2)))
    print("bipartite grid split of a correlated bit (k = 1 bit)")
    print("   n   m    distance    bound")
    for n, m in ((2, 2), (2, 8), (4, 4), (4, 8)):
        g = q.build_bipartite_convex_split(rho, ["P"], n, m)
        print(f"  {n:2d}  {m:2d}    {g.exact_distance:.6f}    {g.declared_bound:.6f}")


if __name__ == "__main__":
    bell_decoys()
    classical_large_n()
    bipartite_grid()
