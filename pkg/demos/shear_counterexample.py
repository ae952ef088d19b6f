"""The shear-plus-expansion pair whose counts keep returning to large values.

B = shear ⊕ 2 acting on a lattice tilted by the golden ratio. The counts of
lattice points in A^j B(0, 2) for j <= 0 are plotted as running record maxima.
"""
import math

from latscope.counting import count_profile, lce_verdict, shear_counterexample

A, L = shear_counterexample((math.sqrt(5) - 1) / 2)
prof = count_profile(A, L, 2.0, -500, 0)
c = prof.counts()
best = 0
for j in range(0, -501, -1):
    if c[j] > best:
        best = c[j]
        print(f"new record at j={j:5d}: {c[j]} points")
print("verdict:", lce_verdict(prof).trend)
