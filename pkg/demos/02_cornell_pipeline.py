"""Full pipeline on a Cornell-style box: train, render, compare.

Trains a field at a modest budget (a couple of minutes), then renders three
views of it -- the network queried directly, the network pushed through one
bounce of transport, and the difference between the two -- plus a low-spp
path-traced reference.  The one-bounce view is usually the cleaner one: the
scattering integral averages the network's errors away.

Outputs land in demos/out/.
"""
from pathlib import Path

import numpy as np

from neuralgi import render, scene_io, scenes, solver
from neuralgi.field import RadianceField, EncoderConfig

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

doc = scenes.cornell_doc(image_size=64)
scene = scenes.build(doc)
camera = scene_io.camera_from_doc(doc)

field = RadianceField(scene, EncoderConfig("grid", levels=3, feat_dim=8),
                      depth=2, width=32, rng=np.random.default_rng(0))
cfg = solver.TrainConfig(n_lhs=256, m_incident=4, steps=1000,
                         seed=0).validate()


def progress(rec):
    if rec.step % 100 == 0:
        print(f"step {rec.step:5d}  loss {rec.loss:.4g}")


solver.train(scene, field, cfg, progress=progress)

print("rendering ...")
lhs = render.render_lhs(scene, field, camera, spp=8, seed=1).image()
rhs = render.render_rhs(scene, field, camera, spp=8, M=4, seed=2).image()
res = render.render_residual(scene, field, camera, spp=8, M=4,
                             seed=3).image()
ref = render.path_trace(scene, camera, spp=32, max_depth=8, seed=4).image()

for name, img in [("lhs", lhs), ("rhs", rhs), ("residual", res),
                  ("reference", ref)]:
    scene_io.write_pfm(np.maximum(img, 0.0), out / f"{name}.pfm")
    scene_io.write_png_preview(np.maximum(img, 0.0), out / f"{name}.png")

print(f"LHS vs reference: mape {render.mape(lhs, ref):.3f}")
print(f"RHS vs reference: mape {render.mape(rhs, ref):.3f}")
print(f"mean |residual|:  {np.abs(res).mean():.4g}")
print(f"images written to {out}/")
