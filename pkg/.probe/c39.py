import time
import numpy as np
from neuralgi import scenes, render, solver, transport
from neuralgi.field import RadianceField, EncoderConfig
from neuralgi.render import Film
from neuralgi.scene_io import camera_from_doc

doc = scenes.furnace_doc(image_size=8)
sc = scenes.build(doc)
cam = camera_from_doc(doc)
t0 = time.time()
img = render.path_trace(sc, cam, spp=4096, max_depth=32, seed=0).image()
t = time.time() - t0
err = np.abs(img - 1.0).max()
print(f"c9 PT 8x8@4096spp: max rel err {err:.4f} mean {img.mean():.4f} ({t:.0f}s)", flush=True)

# c3: unbiasedness at a fixed point
field = RadianceField(sc, EncoderConfig("grid", levels=2, feat_dim=4),
                      depth=2, width=16, rng=np.random.default_rng(0))
batch = solver.sample_batch(sc, 1, np.random.default_rng(7))
h, wo = batch.hits, batch.wo
def scatter(M, n, rng):
    # n independent M-sample estimates at the same point
    import dataclasses
    rep = dataclasses.replace(
        h, **{f.name: np.repeat(getattr(h, f.name), n, axis=0)
              for f in dataclasses.fields(h)
              if isinstance(getattr(h, f.name), np.ndarray)})
    est = transport.estimate_scatter(sc, field, rep.position, rep.geo_normal,
                                     rep.sh_normal, rep.material_id,
                                     np.repeat(wo, n, axis=0), M, rng)
    return est
print("probing c3 ...", flush=True)
t0 = time.time()
rng = np.random.default_rng(11)
ests = []
for _ in range(10):
    ests.append(scatter(1, 10000, rng))
ests = np.concatenate(ests, axis=0)  # [1e5, 3]
ref = scatter(10000, 100, np.random.default_rng(12)).mean(axis=0)
mean = ests.mean(axis=0)
sig = ests.std(axis=0, ddof=1) / np.sqrt(len(ests))
z = np.abs(mean - ref) / sig
print(f"c3 mean {mean} ref {ref} z {z} ({time.time()-t0:.0f}s)", flush=True)
