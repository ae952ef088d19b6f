"""Which dilations keep lattice counts in dilated balls bounded?

Classifies a few dilations by spectrum, then prints det-normalized counts
of lattice points inside A^j B(0, 1) for an expanding matrix and for a Jordan shear pair.
"""
import math

import numpy as np

from latscope.counting import count_profile, lce_verdict, shear_counterexample
from latscope.lattice import preset
from latscope.spectral import Dilation, classify_dilation

for M in ([[2.0, 0.0], [0.0, 3.0]], [[1.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [0.0, 1.0]]):
    c = classify_dilation(M)
    print(np.array(M).tolist(), "->", c.kind)

pairs = [("[[1,1],[-1,1]] on Z2", Dilation([[1.0, 1.0], [-1.0, 1.0]]), preset("Zn", 2)),
         ("shear+2 on golden lattice", *shear_counterexample((math.sqrt(5) - 1) / 2))]
for name, A, L in pairs:
    prof = count_profile(A, L, 1.0, -20, 5)
    v = lce_verdict(prof)
    print(f"\n{name}: trend {v.trend}, sup ratio {v.sup_ratio:.3f}")
    c = prof.counts()
    print("  counts at j = -20, -10, 0, 5:", [c[j] for j in (-20, -10, 0, 5)])
