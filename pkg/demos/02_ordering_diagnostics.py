"""How noise travels through the merge chain, and what the diagnostics say.

Run: python3 demos/02_ordering_diagnostics.py
"""
from clusterquilt import SimConfig, adjusted_rand_index, cluster_quilting, diagnose, simulate
from clusterquilt.diagnostics import data_driven_ordering_check

for sigma in (0.002, 0.3, 1.0):
    sim = simulate(SimConfig(n=200, p=60, K=3, r=2, d=4.5, M=3, overlap=60, sigma=sigma, seed=3))
    rep = diagnose(sim.patches, 2, truth=sim.truth)
    res = cluster_quilting(sim.patches, 2, 3, ordering=rep.ordering)
    ari = adjusted_rand_index(res.labels, sim.truth.z)
    print(f"\nsigma = {sigma}: ARI {ari:.3f}")
    print(rep.table())

sim = simulate(SimConfig(n=200, p=60, K=3, r=2, d=4.5, M=4, overlap=40, sigma=0.3, seed=5))
chk = data_driven_ordering_check(sim.patches, sim.truth.X_star, 2)
print(f"\noracle ordering {chk.oracle_pi} factor {chk.oracle_factor:.3g}; "
      f"data-driven {chk.data_pi} factor {chk.data_factor:.3g} (ratio {chk.ratio:.3f})")
