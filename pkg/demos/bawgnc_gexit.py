"""BSC-correlated sources over BAWGN channels: BP threshold and GEXIT MAP bound.

Uses a coarse 1024-bin grid to stay quick; the acceptance suite runs 2048 bins.
"""
import warnings

import numpy as np

from coupled_de import densities as D
from coupled_de import exit_analysis as X
from coupled_de.ensembles import DegreeDistribution
from coupled_de.joint_de import bp_threshold_symmetric
from coupled_de.regions import sw_symmetric_bound
from coupled_de.sources import SourceModel

dd = DegreeDistribution.regular(4, 6)
m = SourceModel("bsc", 0.1)
grid = D.Grid(25.0, 1024)

print(f"SW symmetric bound at R=0.5: h = {sw_symmetric_bound(m, 0.5):.4f}")
bp = bp_threshold_symmetric("bawgnc", m, dd, tol=1e-3, grid=grid, bracket=(0.3, 0.45))
sigma = D.channel_from_entropy("bawgnc", bp, grid).param
print(f"BP threshold h = {bp:.4f} (sigma = {sigma:.4f})")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")  # low targets need channel entropy > 1
    curve = X.ebp_gexit_bms(dd, m, np.round(np.arange(0.02, 0.99, 0.04), 2), grid)
print("EBP GEXIT curve (target entropy, channel entropy, GEXIT):")
for c in curve:
    print(f"  {c.x:.2f}  {c.h_channel:.4f}  {c.h_exit:.4f}")
print(f"minimum channel entropy on the curve {X.bp_threshold_from_curve(curve):.4f}")
print(f"GEXIT area MAP bound h = {X.map_threshold_area(curve, m, dd):.4f}")
