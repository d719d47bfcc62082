"""Persistence: YAML scene documents (with inline triangle soups or OBJ
references), PFM / PNG image output, binary field checkpoints, and the
training-log CSV."""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .autodiff import AdamState, ParamStore, Tensor
from .field import EncoderConfig, FeatureGrid, GridLevel, RadianceField
from .materials import MaterialError, MaterialTable
from .render import Camera, Film
from .scene import Scene, SceneError

CHECKPOINT_MAGIC = b"NRAD"
CHECKPOINT_VERSION = 1
SCENE_FORMAT_VERSION = 1

_ENC_CODE = {"grid": 0, "posenc": 1, "none": 2}
_ENC_NAME = {v: k for k, v in _ENC_CODE.items()}


class CheckpointError(Exception):
    pass


@dataclass
class SceneLoad:
    doc: dict
    scene: Scene
    camera: Camera | None
    path: str


# ---------------------------------------------------------------- scenes

def load_obj(path: Path):
    """Minimal wavefront loader: v / vn / triangulated f statements."""
    verts, normals = [], []
    faces, face_normals = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "vn":
                normals.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    comp = tok.split("/")
                    vi = int(comp[0])
                    ni = int(comp[2]) if len(comp) > 2 and comp[2] else 0
                    idx.append((vi, ni))
                for k in range(1, len(idx) - 1):   # fan triangulation
                    faces.append([idx[0][0], idx[k][0], idx[k + 1][0]])
                    face_normals.append([idx[0][1], idx[k][1], idx[k + 1][1]])
    verts = np.asarray(verts, dtype=np.float64)
    tri = np.asarray(faces, dtype=np.int64)
    tri = np.where(tri > 0, tri - 1, tri + len(verts))
    v = verts[tri]     # [T,3,3]
    vn = None
    if normals and all(all(n > 0 for n in f) for f in face_normals):
        narr = np.asarray(normals, dtype=np.float64)
        nidx = np.asarray(face_normals, dtype=np.int64) - 1
        vn = narr[nidx]
    return v[:, 0], v[:, 1], v[:, 2], vn


def build_scene(doc: dict, base_dir: Path | str = ".") -> Scene:
    base_dir = Path(base_dir)
    if not isinstance(doc, dict):
        raise SceneError("scene document must be a mapping")
    mats = MaterialTable()
    for name, spec in (doc.get("materials") or {}).items():
        mats.add(name, spec.get("type", "lambertian"),
                 diffuse=spec.get("diffuse", (0, 0, 0)),
                 specular=spec.get("specular", (0, 0, 0)),
                 exponent=float(spec.get("exponent", 1.0)))

    emitter_by_mesh = {}
    for em in doc.get("emitters") or []:
        emitter_by_mesh[em["mesh"]] = (
            np.asarray(em.get("radiance", (0, 0, 0)), dtype=np.float64),
            bool(em.get("two_sided", False)))

    v0s, v1s, v2s, mat_ids, emis, two, vns = [], [], [], [], [], [], []
    any_vn = False
    for mesh in doc.get("meshes") or []:
        name = mesh.get("name", "?")
        mid = mats.index(mesh["material"])
        if "triangles" in mesh:
            tris = np.asarray(mesh["triangles"], dtype=np.float64)
            if tris.ndim != 3 or tris.shape[1:] != (3, 3):
                raise SceneError(f"mesh '{name}': triangles must be [T,3,3]")
            a, b, c, vn = tris[:, 0], tris[:, 1], tris[:, 2], None
        elif "obj" in mesh:
            a, b, c, vn = load_obj(base_dir / mesh["obj"])
        else:
            raise SceneError(f"mesh '{name}' has neither triangles nor obj")
        t = len(a)
        rad, ts = emitter_by_mesh.get(name, (np.zeros(3), False))
        v0s.append(a); v1s.append(b); v2s.append(c)
        mat_ids.append(np.full(t, mid, dtype=np.int64))
        emis.append(np.tile(rad, (t, 1)))
        two.append(np.full(t, ts, dtype=bool))
        if vn is not None:
            any_vn = True
        vns.append(vn if vn is not None else np.zeros((t, 3, 3)))

    if not v0s:
        raise SceneError("scene document contains no meshes")
    vertex_normals = None
    if any_vn:
        vertex_normals = np.concatenate(vns)
        zero = np.all(vertex_normals == 0, axis=(1, 2))
        if np.any(zero):
            # fall back to geometric normals for meshes without vn
            vertex_normals[zero] = np.nan
    scene = Scene(np.concatenate(v0s), np.concatenate(v1s),
                  np.concatenate(v2s), np.concatenate(mat_ids), mats,
                  np.concatenate(emis), np.concatenate(two))
    if vertex_normals is not None and not np.any(np.isnan(vertex_normals)):
        scene.vertex_normals = vertex_normals
    return scene.finalize()


def camera_from_doc(doc: dict) -> Camera | None:
    cam = doc.get("camera")
    if cam is None:
        return None
    return Camera(cam["origin"], cam["look_at"], cam.get("up", (0, 1, 0)),
                  float(cam.get("fov", 45.0)),
                  int(cam.get("width", 128)), int(cam.get("height", 128)))


def load_scene(path) -> SceneLoad:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise SceneError(f"{path}: malformed scene document: {e}") from e
    try:
        scene = build_scene(doc, base_dir=path.parent)
        camera = camera_from_doc(doc)
    except (SceneError, MaterialError, KeyError, TypeError, ValueError) as e:
        raise SceneError(f"{path}: {e}") from e
    return SceneLoad(doc, scene, camera, str(path))


def _plain(obj):
    """Recursively convert numpy scalars/arrays to YAML-safe builtins."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_scene(doc: dict, path):
    with open(path, "w") as fh:
        yaml.safe_dump(_plain(doc), fh, sort_keys=False)


# ---------------------------------------------------------------- images

def write_pfm(image: np.ndarray, path):
    """Little-endian PFM, scanlines bottom-up, scale -1.0."""
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PFM writer expects an HxWx3 image")
    if not np.all(np.isfinite(img)):
        raise ValueError("PFM writer requires finite pixel values")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img[::-1]).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        def token():
            out = b""
            c = fh.read(1)
            while c.isspace():
                c = fh.read(1)
            while c and not c.isspace():
                out += c
                c = fh.read(1)
            return out

        kind = token()
        if kind not in (b"PF", b"Pf"):
            raise ValueError(f"not a PFM file (header {kind!r})")
        w, h = int(token()), int(token())
        scale = float(token())
        channels = 3 if kind == b"PF" else 1
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(w * h * channels * 4), dtype=dtype)
        if data.size != w * h * channels:
            raise ValueError("truncated PFM payload")
        img = data.reshape(h, w, channels)[::-1].astype(np.float32)
        if abs(scale) not in (0.0, 1.0):
            img = img * abs(scale)
        if channels == 1:
            img = img[:, :, 0]
        return np.ascontiguousarray(img)


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """Standard sRGB transfer curve, quantized to 8 bits (0.5 -> 188)."""
    c = np.clip(linear, 0.0, 1.0)
    v = np.where(c <= 0.0031308, 12.92 * c,
                 1.055 * np.power(c, 1.0 / 2.4) - 0.055)
    return np.round(v * 255.0).astype(np.uint8)


def write_png_preview(image: np.ndarray, path, exposure: float = 0.0):
    from PIL import Image

    img = np.asarray(image, dtype=np.float64) * (2.0 ** exposure)
    Image.fromarray(srgb_encode(img), mode="RGB").save(path)


# ------------------------------------------------------------ checkpoints

def _w(fh, fmt, *vals):
    fh.write(struct.pack("<" + fmt, *vals))


def _r(fh, fmt):
    size = struct.calcsize("<" + fmt)
    buf = fh.read(size)
    if len(buf) != size:
        raise CheckpointError("truncated checkpoint")
    vals = struct.unpack("<" + fmt, buf)
    return vals if len(vals) > 1 else vals[0]


def _w_array(fh, arr, dtype):
    a = np.ascontiguousarray(arr, dtype=dtype)
    _w(fh, "Q", a.size)
    fh.write(a.tobytes())


def _r_array(fh, dtype, shape=None):
    n = _r(fh, "Q")
    itemsize = np.dtype(dtype).itemsize
    buf = fh.read(n * itemsize)
    if len(buf) != n * itemsize:
        raise CheckpointError("truncated checkpoint array")
    a = np.frombuffer(buf, dtype=dtype).copy()
    return a.reshape(shape) if shape is not None else a


def save_checkpoint(field: RadianceField, path, step: int = 0,
                    adam: AdamState = None, rng=None):
    """Binary checkpoint; feature/weight arrays stored as little-endian
    float32 regardless of training precision."""
    downcast = field.dtype == np.float64
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        _w(fh, "I", CHECKPOINT_VERSION)
        _w(fh, "B", 1 if downcast else 0)
        _w(fh, "6d", *field.pad_min.tolist(), *field.pad_max.tolist())
        enc = field.encoder
        _w(fh, "BIII", _ENC_CODE[enc.variant], enc.levels, enc.feat_dim,
           enc.posenc_bands)
        _w(fh, "BII", 1 if field.use_local_props else 0, field.depth,
           field.width)
        if enc.variant == "grid":
            for lv in field.grid.levels:
                _w(fh, "IQ", lv.resolution, lv.occupied_voxels)
                _w_array(fh, lv.keys, "<i8")
                _w_array(fh, lv.features.data, "<f4")
        for i in range(field.depth):
            w = field.params[f"w{i}"].data
            _w(fh, "II", w.shape[0], w.shape[1])
            _w_array(fh, w, "<f4")
            _w_array(fh, field.params[f"b{i}"].data, "<f4")
        _w(fh, "Q", step)
        if adam is not None:
            _w(fh, "B", 1)
            _w(fh, "dddd", adam.lr, adam.beta1, adam.beta2, adam.eps)
            _w(fh, "Q", adam.step_count)
            for name in field.params.names():
                _w_array(fh, adam.m[name], "<f4")
                _w_array(fh, adam.v[name], "<f4")
        else:
            _w(fh, "B", 0)
        if rng is not None:
            blob = json.dumps(rng.bit_generator.state).encode()
            _w(fh, "I", len(blob))
            fh.write(blob)
        else:
            _w(fh, "I", 0)


def load_checkpoint(path, dtype=np.float32):
    """Rebuild the field from a checkpoint. Returns (field, meta) where meta
    holds step, the restored AdamState (or None), and the RNG (or None)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        version = _r(fh, "I")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        _r(fh, "B")  # downcast flag, informational
        aabb = _r(fh, "6d")
        enc_code, levels, feat_dim, bands = _r(fh, "BIII")
        use_lp, depth, width = _r(fh, "BII")

        field = object.__new__(RadianceField)
        field.encoder = EncoderConfig(_ENC_NAME[enc_code], levels, feat_dim,
                                      bands)
        field.depth = depth
        field.width = width
        field.use_local_props = bool(use_lp)
        field.dtype = np.dtype(dtype)
        field.pad_min = np.asarray(aabb[:3])
        field.pad_max = np.asarray(aabb[3:])
        field.params = ParamStore()
        field.grid = None
        if field.encoder.variant == "grid":
            lvs = []
            for i in range(levels):
                res, occ = _r(fh, "IQ")
                keys = _r_array(fh, "<i8")
                feats = _r_array(fh, "<f4", (len(keys), feat_dim)).astype(dtype)
                t = field.params.add(f"grid{i}", feats)
                lvs.append(GridLevel(res, keys, t, occupied_voxels=occ))
            field.grid = FeatureGrid(lvs, feat_dim)
        for i in range(depth):
            d_in, d_out = _r(fh, "II")
            w = _r_array(fh, "<f4", (d_in, d_out)).astype(dtype)
            b = _r_array(fh, "<f4", (d_out,)).astype(dtype)
            field.params.add(f"w{i}", w)
            field.params.add(f"b{i}", b)

        step = _r(fh, "Q")
        adam = None
        if _r(fh, "B"):
            adam = AdamState(field.params, 0.0)
            adam.lr, adam.beta1, adam.beta2, adam.eps = _r(fh, "dddd")
            adam.step_count = _r(fh, "Q")
            for name in field.params.names():
                shape = field.params[name].data.shape
                adam.m[name] = _r_array(fh, "<f4", shape).astype(np.float64)
                adam.v[name] = _r_array(fh, "<f4", shape).astype(np.float64)
        rng = None
        blob_len = _r(fh, "I")
        if blob_len:
            state = json.loads(fh.read(blob_len).decode())
            rng = np.random.default_rng(0)
            bg = np.random.PCG64()
            bg.state = state
            rng = np.random.Generator(bg)
        return field, {"step": step, "adam": adam, "rng": rng}


# ------------------------------------------------------------------ logs

def read_training_log(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["step"] = int(row["step"])
        row["samples"] = int(row["samples"])
        for k in ("loss", "lr", "wall_ms"):
            row[k] = float(row[k])
    return rows
