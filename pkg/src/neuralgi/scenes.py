"""Procedural test scenes: a closed constant-albedo emitting box (analytic
solution E/(1-rho)) and a Cornell box with movable inner boxes."""

from __future__ import annotations

import numpy as np

from .scene_io import build_scene


def quad(a, b, c, d):
    """Two triangles for quad a-b-c-d; normal follows cross(b-a, d-a)."""
    return [[list(a), list(b), list(c)], [list(a), list(c), list(d)]]


def box_quads(lo, hi, inward: bool, skip_bottom: bool = False):
    """Axis-aligned box faces; inward=True flips windings so normals point
    into the box interior."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    faces = {
        "bottom": [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],
        "top":    [(x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)],
        "back":   [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],
        "front":  [(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)],
        "left":   [(x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)],
        "right":  [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],
    }
    tris = []
    for name, (a, b, c, d) in faces.items():
        if skip_bottom and name == "bottom":
            continue
        if inward:
            tris += quad(a, d, c, b)
        else:
            tris += quad(a, b, c, d)
    return tris


def furnace_doc(albedo: float = 0.5, emission: float = 0.5,
                size: float = 2.0, image_size: int = 16) -> dict:
    """Closed Lambertian box, uniform emission on every (inward-facing)
    surface. Analytic radiance everywhere: emission / (1 - albedo)."""
    s = size / 2
    return {
        "version": 1,
        "materials": {
            "gray": {"type": "lambertian", "diffuse": [albedo] * 3},
        },
        "meshes": [
            {"name": "box", "material": "gray",
             "triangles": box_quads((-s, -s, -s), (s, s, s), inward=True)},
        ],
        "emitters": [
            {"mesh": "box", "radiance": [emission] * 3, "two_sided": False},
        ],
        "camera": {"origin": [0.0, 0.0, -0.6 * s], "look_at": [0, 0, s],
                   "up": [0, 1, 0], "fov": 60,
                   "width": image_size, "height": image_size},
    }


def cornell_doc(short_box_offset=(0.0, 0.0, 0.0), image_size: int = 64,
                light_radiance=(18.4, 15.6, 8.0)) -> dict:
    """Classic Cornell box (32 triangles: 5 walls, area light, two open-
    bottomed boxes). Walls face inward; the camera looks in along +z."""
    white = [0.73, 0.73, 0.73]
    red = [0.63, 0.065, 0.05]
    green = [0.14, 0.45, 0.091]

    tris = {}
    tris["floor"] = quad((0, 0, 0), (0, 0, 559.2), (552.8, 0, 559.2),
                         (552.8, 0, 0))
    tris["ceiling"] = quad((0, 548.8, 0), (556, 548.8, 0),
                           (556, 548.8, 559.2), (0, 548.8, 559.2))
    tris["back"] = quad((0, 0, 559.2), (0, 548.8, 559.2),
                        (556, 548.8, 559.2), (552.8, 0, 559.2))
    tris["left"] = quad((552.8, 0, 0), (552.8, 0, 559.2),
                        (556, 548.8, 559.2), (556, 548.8, 0))
    tris["right"] = quad((0, 0, 0), (0, 548.8, 0), (0, 548.8, 559.2),
                         (0, 0, 559.2))
    tris["light"] = quad((213, 548.0, 227), (343, 548.0, 227),
                         (343, 548.0, 332), (213, 548.0, 332))

    ox, oy, oz = short_box_offset
    short = np.array([
        [130 + ox, 0 + oy, 65 + oz], [295 + ox, 165 + oy, 230 + oz]])
    tall = np.array([[265, 0, 296], [430, 330, 456]])
    tris["short_box"] = box_quads(short[0], short[1], inward=False,
                                  skip_bottom=True)
    tris["tall_box"] = box_quads(tall[0], tall[1], inward=False,
                                 skip_bottom=True)

    meshes = []
    mat_of = {"floor": "white", "ceiling": "white", "back": "white",
              "left": "red", "right": "green", "light": "white",
              "short_box": "white", "tall_box": "white"}
    for name, t in tris.items():
        meshes.append({"name": name, "material": mat_of[name],
                       "triangles": t})
    return {
        "version": 1,
        "materials": {
            "white": {"type": "lambertian", "diffuse": white},
            "red": {"type": "lambertian", "diffuse": red},
            "green": {"type": "lambertian", "diffuse": green},
        },
        "meshes": meshes,
        "emitters": [
            {"mesh": "light", "radiance": list(light_radiance),
             "two_sided": False},
        ],
        "camera": {"origin": [278, 273, -800], "look_at": [278, 273, 0],
                   "up": [0, 1, 0], "fov": 39.3,
                   "width": image_size, "height": image_size},
    }


def build(doc: dict):
    return build_scene(doc)
