"""Two (3,6)-coded users on a Gaussian MAC: how much gain does each need?

Shows the function node in its two limits, then the symmetric fading
threshold of the uncoupled system and a short coupled chain. A coarse
512-bin grid keeps the whole script to a few minutes.
"""
from coupled_de import densities as D
from coupled_de import mac as MA
from coupled_de.ensembles import CoupledSpec, DegreeDistribution

grid = D.Grid(25.0, 512)
dd = DegreeDistribution.regular(3, 6)
h = 1.2
spec = MA.MacSpec(h, h)

known = MA.mac_node_density(D.DELTA_INF, spec, 1, grid, "quadrature")
unknown = MA.mac_node_density(D.DELTA_0, spec, 1, grid, "quadrature")
print(f"h = {h}: function-node output entropy {D.entropy(known):.4f} with the interferer known, "
      f"{D.entropy(unknown):.4f} with it unknown")
print(f"single-user BAWGN reference {D.entropy(D.bawgnc_density(1 / h, grid)):.4f}")

for hh in (1.60, 1.75):
    r = MA.run_mac_de(MA.MacSpec(hh, hh), dd, grid=grid, method="quadrature")
    print(f"uncoupled h = {hh}: converged={r.converged} after {r.iterations} iterations")

t = MA.mac_threshold_symmetric(dd, grid=grid, method="quadrature", tol=1e-2, bracket=(1.4, 2.0))
print(f"uncoupled (3,6) symmetric threshold h = {t:.3f}")

# well below the uncoupled threshold the coupled chain still decodes: the
# terminated ends start a wave that sweeps inwards
cs = CoupledSpec(3, 6, 8, 2)
for hh in (1.45, 1.0):
    r = MA.run_mac_coupled(MA.MacSpec(hh, hh), cs, grid=grid)
    print(f"coupled (3,6,8,2) h = {hh}: converged={r.converged} after {r.iterations} iterations")
