import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())

def eval_loss(field, seeds=(101, 202, 303, 404, 505)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(cornell, 2048, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(cornell, field, batch, 16,
                                      np.random.default_rng(s + 1), tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals))

for mode in ("self_train", "noisy_target"):
    f = RadianceField(cornell, EncoderConfig("grid"),
                      rng=np.random.default_rng(0))
    cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=6000, seed=0,
                             mode=mode).validate()
    def prog(rec, f=f, mode=mode):
        if rec.step % 1000 == 0:
            print(f"{mode:13s} step {rec.step:5d} eval {eval_loss(f):.5g}",
                  flush=True)
    solver.train(cornell, f, cfg, progress=prog)
