"""Eval-loss trajectories for the three encoders to find a step count
where the expected ordering is stable."""
import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())
MILESTONES = (1000, 2000, 4000, 6000, 8000)

def eval_loss(field, seeds=(101, 202, 303, 404, 505, 606, 707, 808)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(cornell, 2048, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(cornell, field, batch, 8,
                                      np.random.default_rng(s + 1), tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals)), float(np.median(vals))

for var in ("grid", "posenc", "none"):
    f = RadianceField(cornell, EncoderConfig(var, levels=3, feat_dim=8),
                      depth=2, width=32, rng=np.random.default_rng(0))
    state = None
    t0 = time.time()
    for s in MILESTONES:
        cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=s,
                                 seed=0).validate()
        if state is None:
            state = solver.TrainState(adam=ad.AdamState(f.params, cfg.lr))
        solver.train(cornell, f, cfg, state=state,
                     rng=np.random.default_rng((0, s)))
        mean, med = eval_loss(f)
        print(f"{var:7s} step {s:5d} eval mean {mean:.4g} med {med:.4g} "
              f"({time.time()-t0:.0f}s)", flush=True)
