"""Calibrate the analytic cost model on a k=1 run and compare it with simulation.

The model's sync term grows as k log2 k per step while the simulated star
does k exchanges, so the two agree at k=2 and part ways after that. The
flat-star figure is printed next to the model's for comparison.
"""

from dpsent import costmodel
from dpsent.cluster import ClusterConfig, NetworkModel, train_distributed
from dpsent.model import Hyperparams
from dpsent.ingest import EmbedderConfig
from dpsent.synthetic import generate_corpus

docs = generate_corpus(20000, seed=5)
emb = EmbedderConfig(dimension=128)
hp = Hyperparams(epochs=1)
net = NetworkModel()

runs = {k: train_distributed(docs, hp, ClusterConfig(worker_count=k), net, emb)[2] for k in (1, 2, 4, 8)}
ci = costmodel.calibrate(runs[1], costmodel.inputs_for_run(runs[1], 128, 32))
print("calibrated unit costs:")
for name in ("c_pre", "c_emb", "c_fwd", "c_bwd", "c_upd", "c_net", "c_dist"):
    print(f"  {name:<7}{getattr(ci, name):.3e}")

print(f"\n{'k':>3}{'simulated':>12}{'predicted':>12}{'error':>9}{'sync klogk':>12}{'flat star':>11}")
for k, rep in runs.items():
    est = costmodel.estimate_train_distributed(ci.with_workers(k))
    sim = rep.simulated_train
    print(f"{k:>3}{sim:>12.3f}{est.total:>12.3f}{(est.total - sim) / sim:>+9.1%}{est.sync:>12.3f}"
          f"{est.sync_flat_star:>11.3f}")

curve = costmodel.speedup_curve(ci, range(1, 65))
best = min(curve, key=lambda row: row[1])
print(f"\npredicted optimum k={best[0]} with speedup {best[2]:.2f}; at k=64 speedup {curve[-1][2]:.2f}")
