"""Synchronous data parallelism reproduces single-node SGD; local epochs do not.

Each global mini-batch is cut into k slices, gradients are merged by
example count, and the master takes the same step a single node would.
"""

from dpsent.cluster import ClusterConfig, SyncMode, train_distributed
from dpsent.model import Hyperparams, train_single
from dpsent.synthetic import separable_clusters

data = separable_clusters(5000, 32, seed=0, noise=0.8)
hp = Hyperparams(learning_rate=0.05, epochs=3)
ref, ref_metrics, _ = train_single(data, hp)
scale = abs(ref.as_vector()).max()

print(f"single node accuracy {ref_metrics.accuracy:.4f}")
for k in (1, 2, 4, 8):
    params, metrics, _ = train_distributed(data, hp, ClusterConfig(worker_count=k))
    err = abs(params.as_vector() - ref.as_vector()).max() / scale
    print(f"synchronous  k={k}: relative parameter error {err:.1e}, accuracy {metrics.accuracy:.4f}")

for k in (2, 4, 8):
    params, metrics, _ = train_distributed(data, hp, ClusterConfig(worker_count=k, sync_mode=SyncMode.LOCAL_EPOCHS))
    err = abs(params.as_vector() - ref.as_vector()).max() / scale
    print(f"local epochs k={k}: relative parameter error {err:.1e}, accuracy {metrics.accuracy:.4f}")
