import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())
STEPS = 2000

def mk(variant, seed=0):
    return RadianceField(cornell, EncoderConfig(variant),
                         rng=np.random.default_rng(seed))  # d4 w128 defaults

def run(scene, field, steps=STEPS, seed=0, mode="self_train", state=None,
        rng=None):
    cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=steps, seed=seed,
                             mode=mode).validate()
    t0 = time.time()
    solver.train(scene, field, cfg, state=state, rng=rng)
    return time.time() - t0

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
    f = mk(var)
    t = run(cornell, f)
    ev[var] = eval_loss(f)
    if var == "grid":
        f_grid = f
    print(f"c6 {var:7s} eval {ev[var]:.5g} ({t:.0f}s)", flush=True)
print("c6 order ok:", ev["grid"] <= ev["posenc"] <= ev["none"], flush=True)

f_noisy = mk("grid")
t = run(cornell, f_noisy, mode="noisy_target")
ev_n = eval_loss(f_noisy)
print(f"c5 self {ev['grid']:.5g} noisy {ev_n:.5g} ok {ev['grid'] <= ev_n} "
      f"({t:.0f}s)", flush=True)

moved = scenes.build(scenes.cornell_doc(short_box_offset=(90.0, 0.0, 60.0)))
f_scr = mk("grid", seed=3)
t = run(moved, f_scr)
target = eval_loss(f_scr, moved)
print(f"c7 scratch eval {target:.5g} ({t:.0f}s)", flush=True)

f_grid.rebuild_grid(moved, np.random.default_rng(9))
state = solver.TrainState(adam=ad.AdamState(f_grid.params, 5e-4))
hit = None
cfg_full = solver.TrainConfig(n_lhs=256, m_incident=8, steps=STEPS // 2,
                              seed=9).validate()
evals = []
def prog(rec):
    if rec.step % 200 == 0:
        e = eval_loss(f_grid, moved)
        evals.append((rec.step, e))
        print(f"c7 finetune step {rec.step} eval {e:.5g}", flush=True)
solver.train(moved, f_grid, cfg_full, state=state, progress=prog)
