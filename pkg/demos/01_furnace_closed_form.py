"""Train a tiny radiance field inside a uniformly emissive grey box.

Every surface emits E=0.5 and reflects half of what it receives, so the
equilibrium radiance is the geometric series 0.5 * (1 + 0.5 + 0.25 + ...)
= 1.0 everywhere, in every direction.  That gives us a rare luxury: an
exact answer to train against.  This script trains for a few thousand
steps and reports how far the network is from the closed form.
"""
import numpy as np

from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig

scene = scenes.build(scenes.furnace_doc())

field = RadianceField(scene, EncoderConfig("grid", levels=2, feat_dim=4),
                      depth=2, width=16, rng=np.random.default_rng(0))

cfg = solver.TrainConfig(n_lhs=128, m_incident=32, steps=2000,
                         seed=0).validate()


def progress(rec):
    if rec.step % 200 == 0:
        print(f"step {rec.step:5d}  loss {rec.loss:.4g}  lr {rec.lr:.2e}")


solver.train(scene, field, cfg, progress=progress)

# evaluate the trained field at random surface points / outgoing directions
rng = np.random.default_rng(42)
batch = solver.sample_batch(scene, 1000, rng)
hits = batch.hits
L = field.radiance_L(scene, hits, batch.wo).data
err = np.abs(L - 1.0)
print(f"\nmean radiance {L.mean():.4f}  (exact: 1.0)")
print(f"max abs error  {err.max():.4f}  mean {err.mean():.4f}")
