import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

cornell = scenes.build(scenes.cornell_doc())
STEPS = 1500

def mk(variant, seed=0):
    return RadianceField(cornell, EncoderConfig(variant, levels=5, feat_dim=8),
                         depth=2, width=128, rng=np.random.default_rng(seed))

def run(scene, field, steps=STEPS, seed=0, mode="self_train"):
    cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=steps, seed=seed,
                             mode=mode, pt_max_depth=4).validate()
    t0 = time.time()
    st = solver.train(scene, field, cfg)
    return st, time.time() - t0

def eval_loss(field, scene=cornell, seeds=(101, 202, 303, 404, 505)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(scene, n=2048 if True else 0,
                                    rng=np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(scene, field, batch, 8,
                                      np.random.default_rng(s + 1), tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals))

ev = {}
fields = {}
for var in ("grid", "posenc", "none"):
    f = mk(var)
    st, t = run(cornell, f)
    ev[var] = eval_loss(f)
    fields[var] = f
    print(f"c6 {var:7s} eval {ev[var]:.5g} ({t:.0f}s)", flush=True)
print("c6 order ok:", ev["grid"] <= ev["posenc"] <= ev["none"], flush=True)

f_noisy = mk("grid")
st, t = run(cornell, f_noisy, mode="noisy_target")
ev_n = eval_loss(f_noisy)
print(f"c5 self {ev['grid']:.5g} noisy {ev_n:.5g} ok {ev['grid'] <= ev_n} "
      f"({t:.0f}s)", flush=True)

moved = scenes.build(scenes.cornell_doc(short_box_offset=(90.0, 0.0, 60.0)))
f_scr = mk("grid", seed=3)
st, t = run(moved, f_scr)
target = eval_loss(f_scr, moved)
print(f"c7 scratch eval {target:.5g} ({t:.0f}s)", flush=True)

f_ft = fields["grid"]
f_ft.rebuild_grid(moved, np.random.default_rng(9))
state = solver.TrainState(adam=ad.AdamState(f_ft.params, 5e-4))
hit = None
t0 = time.time()
for milestone in range(150, STEPS // 2 + 1, 150):
    cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=milestone,
                             seed=9).validate()
    solver.train(moved, f_ft, cfg, state=state,
                 rng=np.random.default_rng((9, milestone)))
    e = eval_loss(f_ft, moved)
    print(f"c7 finetune step {milestone} eval {e:.5g}", flush=True)
    if e <= target:
        hit = milestone
        break
print(f"c7 hit {hit} (half budget {STEPS//2}) ({time.time()-t0:.0f}s)",
      flush=True)
