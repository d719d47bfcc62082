import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())

def eval_loss(field, seeds=(101, 202, 303)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(cornell, 2048, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(cornell, field, batch, 8,
                                      np.random.default_rng(s + 1), tape=tape)
        m = 0.5 * (lhs.data + rhs.data)
        rel = ((r.data / (m + 0.01)) ** 2).mean(axis=1)
        vals.append(rel)
    rel = np.concatenate(vals)
    return float(np.median(rel)), float(rel.mean())

CONFIGS = [
    ("n1024_w32_l3",  1024, 32, 3),
    ("n256_w128_l5",  256, 128, 5),
    ("n256_w32_l3",   256, 32, 3),
    ("n1024_w128_l5", 1024, 128, 5),
]
for tag, n, w, lv in CONFIGS:
    f = RadianceField(cornell, EncoderConfig("grid", levels=lv, feat_dim=8),
                      depth=2, width=w, rng=np.random.default_rng(0))
    cfg = solver.TrainConfig(n_lhs=n, m_incident=8, steps=1500,
                             seed=0).validate()
    t0 = time.time()
    solver.train(cornell, f, cfg)
    med, mean = eval_loss(f)
    print(f"{tag:15s} relsq med {med:.4g} mean {mean:.4g} "
          f"({time.time()-t0:.0f}s)", flush=True)
