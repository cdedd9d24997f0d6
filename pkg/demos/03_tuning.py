"""Pick rank and cluster count by prediction validation.

Run: python3 demos/03_tuning.py
"""
from clusterquilt import SimConfig, TuneGrid, simulate, tune

sim = simulate(SimConfig(n=120, p=40, K=3, r=2, d=4.5, M=3, pattern="mosaic", views=4, views_per_block=2,
                         sigma=0.0, seed=2))
res = tune(sim.patches, TuneGrid(ranks=[1, 2, 3], cluster_counts=[2, 3, 4]), seed=0)
print(f"{'r':>2} {'K':>2} agreement")
for (r, k), v in res.table.items():
    print(f"{r:>2} {k:>2} {v:9.3f}")
print(f"selected r={res.rank}, K={res.K}")
