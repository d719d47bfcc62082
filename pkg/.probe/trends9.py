"""Encoder ablation on a Cornell box with a mirror tall box and a glossy
short box -- high-frequency radiance that should separate the encoders."""
import copy
import time
import numpy as np
from neuralgi import scenes, solver
from neuralgi.field import RadianceField, EncoderConfig
import neuralgi.autodiff as ad

doc = scenes.cornell_doc()
doc["materials"]["mirror"] = {"type": "mirror", "specular": [0.9, 0.9, 0.9]}
doc["materials"]["glossy"] = {"type": "phong",
                              "specular": [0.4, 0.4, 0.4],
                              "diffuse": [0.3, 0.3, 0.3],
                              "exponent": 50}
for mesh in doc["meshes"]:
    if mesh["name"] == "tall_box":
        mesh["material"] = "mirror"
    if mesh["name"] == "short_box":
        mesh["material"] = "glossy"
scene = scenes.build(doc)

def eval_loss(field, seeds=(101, 202, 303, 404, 505)):
    vals = []
    for s in seeds:
        batch = solver.sample_batch(scene, 2048, np.random.default_rng(s))
        tape = ad.Tape()
        r, lhs, rhs = solver.residual(scene, field, batch, 16,
                                      np.random.default_rng(s + 1), tape=tape)
        vals.append(float(solver.relative_loss(tape, r, lhs, rhs,
                                               batch.pdf, 0.01).data))
    return float(np.mean(vals))

for var in ("grid", "posenc", "none"):
    f = RadianceField(scene, EncoderConfig(var), rng=np.random.default_rng(0))
    cfg = solver.TrainConfig(n_lhs=256, m_incident=8, steps=2000,
                             seed=0).validate()
    t0 = time.time()
    solver.train(scene, f, cfg)
    print(f"{var:7s} eval {eval_loss(f):.5g} ({time.time()-t0:.0f}s)",
          flush=True)
