"""Joint decoding of two erasure-correlated sources over BECs with punctured (4,6) codes.

Walks from the Slepian-Wolf limits to what BP achieves, then uses the EBP EXIT
curve and the area theorem to bound what MAP decoding could achieve.
"""
import numpy as np

from coupled_de import exit_analysis as X
from coupled_de import regions as R
from coupled_de.ensembles import DegreeDistribution, puncture_fraction, punctured_rate
from coupled_de.joint_de import bp_threshold_second, bp_threshold_symmetric
from coupled_de.sources import SourceModel, source_entropies

dd = DegreeDistribution.regular(4, 6)
m = SourceModel("erasure", 0.5)

g = puncture_fraction(dd)
print(f"(4,6): punctured fraction {g:.4f}, transmitted rate {punctured_rate(dd):.3f}")
hc, hj = source_entropies(m)
print(f"H(U1|U2) = {hc}, H(U1,U2) = {hj}")

single, total = R.sw_bounds(m, 0.5)
print(f"Slepian-Wolf at R=0.5: each eps <= {single}, eps1 + eps2 <= {total}, "
      f"symmetric {R.sw_symmetric_bound(m, 0.5)}")

# BP: exact scalar DE on erasure masses
sym = bp_threshold_symmetric("bec", m, dd)
print(f"BP symmetric threshold  {sym:.4f}")
for e1 in (0.0, 0.2, 0.4, 0.5):
    print(f"  eps1 = {e1:.1f}  ->  eps2 threshold {bp_threshold_second('bec', e1, m, dd):.4f}")

# MAP upper bound: area under the EBP EXIT curve
curve = X.ebp_exit_bec(dd, m)
t = X.map_threshold_area(curve, m, dd)
print(f"EBP curve: BP point {X.bp_threshold_from_curve(curve):.4f}, area target {X.area_target(m, dd):.4f}")
print(f"MAP upper bound {t:.4f}; gap to the SW bound {R.sw_symmetric_bound(m, 0.5) - t:.4f}")

# a coarse picture of the BP region
p = R.lattice(0, 1, 0.1)
reg = R.acpr_sweep(dd, m, "bec", p)
print("achievable (rows eps1, columns eps2 = 0.0 .. 1.0):")
for e1, row in zip(p, reg.achievable):
    print(f"  {e1:.1f} " + "".join("#" if v else "." for v in row))
