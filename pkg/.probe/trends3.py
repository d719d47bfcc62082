import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())

def mk(variant, seed=0):
    return RadianceField(cornell, EncoderConfig(variant, levels=3, feat_dim=8),
                         depth=2, width=32, dtype=np.float32,
                         rng=np.random.default_rng(seed))

def run(field, steps=800, seed=0):
    cfg = solver.TrainConfig(n_lhs=256, m_incident=4, steps=steps,
                             seed=seed).validate()
    solver.train(cornell, field, cfg)

def diag(field, tag):
    batch = solver.sample_batch(cornell, 2048, np.random.default_rng(101))
    tape = ad.Tape()
    r, lhs, rhs = solver.residual(cornell, field, batch, 8,
                                  np.random.default_rng(102), tape=tape)
    m = 0.5 * (lhs.data + rhs.data)
    rel = (r.data / (m + 0.01)) ** 2
    per = rel.mean(axis=1)
    q = np.percentile(per, [50, 90, 99, 100])
    print(f"{tag:7s} relsq p50 {q[0]:.3g} p90 {q[1]:.3g} p99 {q[2]:.3g} "
          f"max {q[3]:.3g} mean {per.mean():.3g}", flush=True)
    i = per.argmax()
    print(f"  worst: lhs {lhs.data[i]} rhs {rhs.data[i]} "
          f"mat {batch.hits.material_id[i]} pos {batch.hits.position[i]}",
          flush=True)

for var in ("grid", "posenc"):
    f = mk(var); run(f); diag(f, var)
