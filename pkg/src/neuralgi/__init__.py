"""Global-illumination solver that trains a neural radiance field by
minimizing the Monte Carlo residual of the rendering equation."""

from .autodiff import AdamState, ParamStore, Tape, Tensor, grad_check
from .field import EncoderConfig, FeatureGrid, RadianceField, build_sparse_grid
from .geometry import Ray, build_bvh, intersect_rays, intersect_rays_brute
from .materials import MaterialTable
from .render import Camera, Film, mape, mse, path_trace, render_lhs, \
    render_rhs, render_residual
from .scene import Scene, SceneError
from .scene_io import load_checkpoint, load_scene, read_pfm, \
    save_checkpoint, write_pfm
from .solver import SolverError, TrainConfig, finetune, train

__all__ = [
    "AdamState", "Camera", "EncoderConfig", "FeatureGrid", "Film",
    "MaterialTable", "ParamStore", "RadianceField", "Ray", "Scene",
    "SceneError", "SolverError", "Tape", "Tensor", "TrainConfig",
    "build_bvh", "build_sparse_grid", "finetune", "grad_check",
    "intersect_rays", "intersect_rays_brute", "load_checkpoint",
    "load_scene", "mape", "mse", "path_trace", "read_pfm", "render_lhs",
    "render_residual", "render_rhs", "save_checkpoint", "train", "write_pfm",
]

__version__ = "0.1.0"
