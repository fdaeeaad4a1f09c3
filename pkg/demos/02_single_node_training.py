"""Single-node logistic regression on the bundled synthetic corpus.

Loss is printed after every epoch; the phase report shows where the time
went, both measured and on the virtual clock.
"""

from dpsent.experiment import ExperimentConfig, load_documents
from dpsent.ingest import EmbedderConfig
from dpsent.model import Hyperparams, batch_loss, train_single

docs, stats = load_documents(ExperimentConfig())
print(f"{stats.retained} documents from the bundled corpus")


def show(epoch, params, train):
    print(f"epoch {epoch + 1:>2}  training loss {batch_loss(params, train):.4f}")


params, metrics, rep = train_single(docs, Hyperparams(epochs=10), EmbedderConfig(dimension=256), on_epoch_end=show)

print(f"\nvalidation accuracy {metrics.accuracy:.4f} ({metrics.correct}/{metrics.total})")
print(f"confusion [[TN, FP], [FN, TP]] = {metrics.confusion}")
print(f"\n{'phase':<12}{'wall s':>10}{'virtual s':>12}")
for phase in ("preprocess", "embedding", "forward", "backward", "update", "evaluate"):
    print(f"{phase:<12}{rep.wall.get(phase, 0):>10.3f}{rep.simulated.get(phase, 0):>12.3f}")
