import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())

def mk(variant, seed=0):
    return RadianceField(cornell, EncoderConfig(variant, levels=5, feat_dim=8),
                         depth=2, width=128, rng=np.random.default_rng(seed))

def eval_loss(field, seeds=(101, 202, 303, 404, 505, 606, 707, 808)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(cornell, 2048, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(cornell, field, batch, 8,
                                      np.random.default_rng(s + 1), tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals))

# A: early-convergence ordering for the encoders
print("== milestones ==", flush=True)
for var in ("grid", "posenc", "none"):
    f = mk(var)
    state = None
    for s in (300, 600, 1000, 1500):
        cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=s,
                                 seed=0).validate()
        if state is None:
            state = solver.TrainState(adam=ad.AdamState(f.params, cfg.lr))
        solver.train(cornell, f, cfg, state=state,
                     rng=np.random.default_rng((0, s)))
        print(f"{var:7s} step {s:5d} eval {eval_loss(f):.5g}", flush=True)

# B: self vs noisy at tight sample budgets, longer horizon
print("== self vs noisy, M=2, S=3000 ==", flush=True)
for mode in ("self_train", "noisy_target"):
    f = mk("grid")
    cfg = solver.TrainConfig(n_lhs=256, m_incident=2, steps=3000, seed=0,
                             mode=mode, pt_max_depth=4).validate()
    t0 = time.time()
    solver.train(cornell, f, cfg)
    print(f"{mode:13s} eval {eval_loss(f):.5g} ({time.time()-t0:.0f}s)",
          flush=True)
