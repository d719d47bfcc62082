import numpy as np, time, sys
from neuralgi import scenes, solver, render, scene_io
from neuralgi.field import RadianceField, EncoderConfig

t0 = time.time()
doc = scenes.cornell_doc(image_size=64)
scene = scenes.build(doc)
cam = scene_io.camera_from_doc(doc)

field = RadianceField(scene, EncoderConfig('grid'), rng=np.random.default_rng(0))
cfg = solver.TrainConfig(n_lhs=1024, m_incident=8, steps=20000, seed=0).validate()

def progress(rec):
    if rec.step % 1000 == 0:
        print(f'step {rec.step} loss {rec.loss:.4g} t {time.time()-t0:.0f}s', flush=True)

state = solver.train(scene, field, cfg, progress=progress)
print('trained', time.time()-t0, flush=True)
scene_io.save_checkpoint(field, '/root/pkg/.probe/cornell_final.nrad', step=state.step, adam=state.adam)

gt = render.path_trace(scene, cam, spp=4096, max_depth=32, seed=99).image()
scene_io.write_pfm(gt, '/root/pkg/.probe/cornell_gt.pfm')
print('gt done', time.time()-t0, flush=True)

lhs = render.render_lhs(scene, field, cam, spp=16, seed=5).image()
rhs = render.render_rhs(scene, field, cam, spp=16, m=8, seed=6).image()
scene_io.write_pfm(lhs, '/root/pkg/.probe/cornell_lhs.pfm')
scene_io.write_pfm(rhs, '/root/pkg/.probe/cornell_rhs.pfm')
print('LHS MAPE', render.mape(lhs, gt), flush=True)
print('RHS MAPE', render.mape(rhs, gt), flush=True)
print('total', time.time()-t0, flush=True)
