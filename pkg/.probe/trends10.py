"""Re-run the trend rehearsal after the position-normalization fix:
plain Cornell, default architecture, S=2000, n=256, M=8."""
import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())

def eval_loss(field, scene=cornell, seeds=(101, 202, 303, 404, 505)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(scene, 2048, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(scene, field, batch, 16,
                                      np.random.default_rng(s + 1), tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals))

ev = {}
f_grid = None
for var in ("grid", "posenc", "none"):
    f = RadianceField(cornell, EncoderConfig(var), rng=np.random.default_rng(0))
    cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=2000,
                             seed=0).validate()
    t0 = time.time()
    solver.train(cornell, f, cfg)
    ev[var] = eval_loss(f)
    if var == "grid":
        f_grid = f
    print(f"c6 {var:7s} eval {ev[var]:.5g} ({time.time()-t0:.0f}s)", flush=True)
print("c6 order ok:", ev["grid"] <= ev["posenc"] <= ev["none"], flush=True)

f_noisy = RadianceField(cornell, EncoderConfig("grid"),
                        rng=np.random.default_rng(0))
cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=2000, seed=0,
                         mode="noisy_target").validate()
t0 = time.time()
solver.train(cornell, f_noisy, cfg)
ev_n = eval_loss(f_noisy)
print(f"c5 self {ev['grid']:.5g} noisy {ev_n:.5g} ok {ev['grid'] <= ev_n} "
      f"({time.time()-t0:.0f}s)", flush=True)
