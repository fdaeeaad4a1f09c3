"""What crosses the simulated star network, and how long it takes.

Every transfer is recorded; the bandwidth table aggregates them per phase
and the transfer log can be exported as CSV.
"""

import tempfile
from pathlib import Path

from dpsent.cluster import ClusterConfig, NetworkModel, train_distributed, transfers_to_csv
from dpsent.model import Hyperparams
from dpsent.report import bandwidth_table, render_bandwidth
from dpsent.synthetic import separable_clusters

data = separable_clusters(8000, 128, seed=3)
net = NetworkModel(link_bandwidth_gbps=10, link_latency_us=50)
_, _, rep = train_distributed(data, Hyperparams(epochs=2), ClusterConfig(worker_count=4), net)

print(render_bandwidth(bandwidth_table(rep.transfers)))
for phase, nbytes in rep.bytes.items():
    print(f"{phase:<22}{nbytes:>14,d} bytes  {rep.network_seconds[phase]:.4f} s")
print(f"\n{rep.train_examples} training records x {net.record_size(128)} bytes = "
      f"{rep.train_examples * net.record_size(128):,d}")
print(f"{rep.steps} steps x 4 workers x 2 x 129 x 8 bytes = {rep.steps * 4 * 2 * 129 * 8:,d}")
print(f"sync message units {rep.sync_messages:,d}, result messages {rep.test_messages}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "transfers.csv"
    transfers_to_csv(rep.transfers, path)
    lines = path.read_text().splitlines()
print(f"\ntransfer log: {len(lines) - 1} rows, e.g.")
print("\n".join(lines[:4]))
