"""MSF wavelets from tiling annuli, Calderon sums and the local integrability functional."""
import math

import numpy as np

from latscope.counting import shear_counterexample
from latscope.lattice import dual, preset
from latscope.region import Box, sample_annulus, tiling_annulus, tiling_check
from latscope.spectral import Dilation
from latscope.wavelet import (TestFunction, calderon_sum, lic_counterexample_psi, lic_functional,
                              msf_from_tiling)

A = Dilation(2 * np.eye(2))
S = tiling_annulus(A)
print("tiling rate for 2I:", tiling_check(A, S, 5000, 40, seed=1).single_cover_rate)

psi = msf_from_tiling(S)
X = sample_annulus(2, 2000, 0.1, 10, np.random.default_rng(1))
print("Calderon sums all one:", bool(np.all(calderon_sum(psi, A, X, 40).sums == 1.0)))

f = TestFunction(Box([1.0, 0.3], [1.2, 0.5]))
rep = lic_functional(psi, A, preset("Zn", 2), f, 30, n_samples=20000, seed=1)
print("LIC partial sums (MSF, Z2):", [round(s, 4) for s in rep.partial_sums], rep.diagnosis)

B, Gd = shear_counterexample((math.sqrt(5) - 1) / 2)
psi_b, spec, g = lic_counterexample_psi(B, Gd, 2.0, "b", 5, seed=1)
print("\nadversarial exponents:", spec.js, "weights v:", spec.v)
rep = lic_functional(psi_b, B.transpose(), dual(Gd), g, 150, n_samples=20000, seed=1)
print("LIC partial sums (adversarial):", [round(s, 1) for s in rep.partial_sums], rep.diagnosis)
print(f"Calderon bound sum 1/v = {spec.calderon_bound:.4f}")
