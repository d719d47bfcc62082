import dataclasses
import time
import numpy as np
from neuralgi import scenes, solver, transport
from neuralgi.field import RadianceField, EncoderConfig

sc = scenes.build(scenes.furnace_doc())
field = RadianceField(sc, EncoderConfig("grid", levels=2, feat_dim=4),
                      depth=2, width=16, rng=np.random.default_rng(0))
batch = solver.sample_batch(sc, 1, np.random.default_rng(7))
h, wo = batch.hits, batch.wo

def scatter(M, n, rng):
    rep = dataclasses.replace(
        h, **{f.name: np.repeat(getattr(h, f.name), n, axis=0)
              for f in dataclasses.fields(h)
              if isinstance(getattr(h, f.name), np.ndarray)})
    return transport.estimate_scatter(
        sc, field, rep.position, rep.geo_normal, rep.sh_normal,
        rep.material_id, np.repeat(wo, n, axis=0), M, rng).data

t0 = time.time()
rng = np.random.default_rng(11)
ests = np.concatenate([scatter(1, 10000, rng) for _ in range(10)], axis=0)
ref = scatter(10000, 100, np.random.default_rng(12)).mean(axis=0)
mean = ests.mean(axis=0)
sig = ests.std(axis=0, ddof=1) / np.sqrt(len(ests))
z = np.abs(mean - ref) / sig
print(f"c3 mean {mean} ref {ref} z {z} ({time.time()-t0:.0f}s)")
