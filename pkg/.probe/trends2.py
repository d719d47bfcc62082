import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())

def mk(variant, seed=0):
    return RadianceField(cornell, EncoderConfig(variant, levels=3, feat_dim=8),
                         depth=2, width=32, dtype=np.float32,
                         rng=np.random.default_rng(seed))

def run(field, steps=800, seed=0, mode="self_train"):
    cfg = solver.TrainConfig(n_lhs=256, m_incident=4, steps=steps, seed=seed,
                             mode=mode, pt_max_depth=4).validate()
    t0 = time.time()
    solver.train(cornell, field, cfg)
    return time.time() - t0

def eval_loss(field, n=1024, m=8, seeds=(101, 202, 303)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(cornell, n, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(cornell, field, batch, m,
                                      np.random.default_rng(s + 1), tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals))

for var in ("grid", "posenc", "none"):
    f = mk(var)
    t = run(f)
    print(f"c6 {var:7s} eval {eval_loss(f):.5g} ({t:.0f}s)", flush=True)
