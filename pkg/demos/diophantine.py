"""Norm-form minima for fixed and Haar-rotated planar lattices."""
from latscope.dioph import nu, skriganov_experiment, ubiquity_experiment
from latscope.lattice import preset
from latscope.spectral import Dilation

Z2 = preset("Zn", 2)
sq = preset("sqrt2-norm")
for rho in (10, 100, 1000):
    print(f"rho={rho:5d}  nu(Z2)={nu(Z2, rho).value:.3g}  nu(sqrt2-norm)={nu(sq, rho).value:.3g}")

rep = skriganov_experiment(Z2, [10, 100, 1000], 0.5, 40, seed=7, workers=4)
print(f"\nrotated Z2: {rep.pass_count}/40 trials above (log rho)^-1.5 at every rho")

ub = ubiquity_experiment(Dilation([[2.0, 0.0], [0.0, 3.0]]), Z2, 1.0, 10, (-30, 0), seed=7)
print(f"diag(2,3) over rotated Z2: {ub.pass_count}/10 trials with bounded counts on j in [-30, 0]")
