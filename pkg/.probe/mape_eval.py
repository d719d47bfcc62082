"""Evaluate the pre-normalization checkpoint with the input convention it
was trained under, to calibrate criterion-4 thresholds."""
import numpy as np
import neuralgi.field as fieldmod
import neuralgi.autodiff as ad
from neuralgi import render, scenes, scene_io

def old_assemble_input(self, tape, props):
    x = props.position.astype(self.dtype)
    parts = [x]
    if self.encoder.variant == "grid":
        parts.append(self.grid.query(tape, props.position))
    elif self.encoder.variant == "posenc":
        parts.append(fieldmod.positional_encoding(
            props.position, self.encoder.posenc_bands).astype(self.dtype))
    parts.append(props.wo.astype(self.dtype))
    if self.use_local_props:
        parts.append(props.normal.astype(self.dtype))
        parts.append(props.diffuse.astype(self.dtype))
        parts.append(props.specular.astype(self.dtype))
        parts.append(props.roughness.astype(self.dtype))
    return ad.concat(tape, parts, axis=1)

fieldmod.RadianceField.assemble_input = old_assemble_input

doc = scenes.cornell_doc(image_size=64)
scene = scenes.build(doc)
cam = scene_io.camera_from_doc(doc)
field, _ = scene_io.load_checkpoint(".probe/cornell_final.nrad")
gt = scene_io.read_pfm(".probe/cornell_gt.pfm")
lhs = render.render_lhs(scene, field, cam, spp=16, seed=5).image()
rhs = render.render_rhs(scene, field, cam, spp=16, M=8, seed=6).image()
print("LHS MAPE", render.mape(lhs, gt))
print("RHS MAPE", render.mape(rhs, gt))
scene_io.write_png_preview(np.maximum(lhs, 0), ".probe/lhs.png")
scene_io.write_png_preview(np.maximum(gt, 0), ".probe/gt.png")
