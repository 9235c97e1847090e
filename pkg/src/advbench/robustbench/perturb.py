"""The 14 common-perturbation types with a documented severity ramp.

Severity is a fraction s in [0, 1]; each type maps it linearly onto a
per-type parameter range (see SEVERITY_TABLE). s = 0 reproduces the clean
image exactly. Geometric types warp with bilinear interpolation and edge
replication. Noise types draw fresh samples from the caller's RNG; the other
categories are deterministic functions of (image, severity) plus a random
field derived from a build-seed-independent hash of (type, image id), so
rebuilding with a different seed changes only the noise category.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import ContractError
from ..seeding import stable_seed


@dataclass(frozen=True)
class PerturbationType:
    name: str        # display name, e.g. "Gaussian blur"
    key: str         # snake identifier, e.g. "gaussian_blur"
    category: str    # noise | blur | weather | digital
    temporal: bool   # False for the i.i.d. noise category


_TYPES = [
    ("Brightness", "brightness", "digital", True),
    ("Gaussian blur", "gaussian_blur", "blur", True),
    ("Gaussian noise", "gaussian_noise", "noise", False),
    ("Motion blur", "motion_blur", "blur", True),
    ("Rotate", "rotate", "digital", True),
    ("Scale", "scale", "digital", True),
    ("Shear", "shear", "digital", True),
    ("Shot noise", "shot_noise", "noise", False),
    ("Snow", "snow", "weather", True),
    ("Spatter", "spatter", "weather", True),
    ("Speckle noise", "speckle_noise", "noise", False),
    ("Tilt", "tilt", "digital", True),
    ("Translate", "translate", "digital", True),
    ("Zoom blur", "zoom_blur", "blur", True),
]

PERTURBATION_TYPES = {key: PerturbationType(name, key, cat, temp)
                      for name, key, cat, temp in _TYPES}

# Linear ramp endpoints at severity 1.0 (severity 0.0 is always the identity)
SEVERITY_TABLE = {
    "brightness": {"offset": 0.3},
    "gaussian_blur": {"sigma": 3.0},
    "gaussian_noise": {"sigma": 0.10},
    "motion_blur": {"length_px": 9.0},
    "rotate": {"degrees": 15.0},
    "scale": {"zoom": 1.3},
    "shear": {"shear": 0.25},
    "shot_noise": {"photon_scale_at_full": 25.0},
    "snow": {"z_start": 2.2, "z_end": 1.0, "whitening": 0.15},
    "spatter": {"z_start": 2.4, "z_end": 1.3, "darkening": 0.75},
    "speckle_noise": {"sigma": 0.25},
    "tilt": {"corner_inset_frac": 0.15},
    "translate": {"shift_frac": 0.10},
    "zoom_blur": {"max_zoom": 1.15, "n_zooms": 7},
}


def resolve_type(name_or_key: str) -> PerturbationType:
    key = name_or_key.strip().lower().replace(" ", "_")
    if key not in PERTURBATION_TYPES:
        raise ContractError(
            f"unknown perturbation type {name_or_key!r}; known: {sorted(PERTURBATION_TYPES)}"
        )
    return PERTURBATION_TYPES[key]


# ---- warping helpers ---------------------------------------------------------


def _warp(image: np.ndarray, forward: np.ndarray) -> np.ndarray:
    """Apply a forward (input -> output) homography, bilinear + edge replication."""
    c, h, w = image.shape
    inv = np.linalg.inv(forward)
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    ones = np.ones_like(xs)
    src = inv @ np.stack([xs.ravel(), ys.ravel(), ones.ravel()])
    sx = (src[0] / src[2]).reshape(h, w)
    sy = (src[1] / src[2]).reshape(h, w)
    out = np.stack([
        ndimage.map_coordinates(ch, [sy, sx], order=1, mode="nearest")
        for ch in image
    ])
    return np.clip(out, 0.0, 1.0)


def _about_center(h: int, w: int, mat2x3: np.ndarray) -> np.ndarray:
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    to_center = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=np.float64)
    back = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1]], dtype=np.float64)
    mat = np.eye(3)
    mat[:2, :3] = mat2x3
    return back @ mat @ to_center


def _homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Solve the 8-dof projective map sending src corners to dst corners."""
    rows = []
    rhs = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        rhs.append(u)
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        rhs.append(v)
    h = np.linalg.solve(np.array(rows, dtype=np.float64), np.array(rhs, dtype=np.float64))
    return np.array([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])


def _field(key: str, image_id: str, shape) -> np.ndarray:
    """Standard-normal field fixed by (type, image id); independent of build seed."""
    rng = np.random.default_rng(stable_seed("field", key, image_id))
    return rng.standard_normal(shape)


# ---- per-type transforms -----------------------------------------------------


def _brightness(img, s, _ctx):
    return np.clip(img + SEVERITY_TABLE["brightness"]["offset"] * s, 0.0, 1.0)


def _gaussian_blur(img, s, _ctx):
    sigma = SEVERITY_TABLE["gaussian_blur"]["sigma"] * s
    return np.clip(np.stack([
        ndimage.gaussian_filter(ch, sigma=sigma, mode="nearest") for ch in img
    ]), 0.0, 1.0)


def _gaussian_noise(img, s, ctx):
    sigma = SEVERITY_TABLE["gaussian_noise"]["sigma"] * s
    return np.clip(img + ctx["rng"].normal(0.0, sigma, size=img.shape), 0.0, 1.0)


def _shot_noise(img, s, ctx):
    lam = SEVERITY_TABLE["shot_noise"]["photon_scale_at_full"] / s
    return np.clip(ctx["rng"].poisson(img * lam) / lam, 0.0, 1.0)


def _speckle_noise(img, s, ctx):
    sigma = SEVERITY_TABLE["speckle_noise"]["sigma"] * s
    return np.clip(img + img * ctx["rng"].normal(0.0, sigma, size=img.shape), 0.0, 1.0)


def _motion_blur(img, s, ctx):
    length = 1.0 + (SEVERITY_TABLE["motion_blur"]["length_px"] - 1.0) * s
    angle = float(ctx["field_rng"].uniform(0.0, np.pi))
    size = 9
    kernel = np.zeros((size, size), dtype=np.float64)
    center = (size - 1) / 2.0
    n_samples = 257
    ts = np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, n_samples)
    xs = center + ts * np.cos(angle)
    ys = center + ts * np.sin(angle)
    # bilinear splat of the line into the kernel
    x0, y0 = np.floor(xs).astype(int), np.floor(ys).astype(int)
    fx, fy = xs - x0, ys - y0
    for dx, dy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        np.add.at(kernel, (np.clip(y0 + dy, 0, size - 1),
                           np.clip(x0 + dx, 0, size - 1)), wgt)
    kernel /= kernel.sum()
    return np.clip(np.stack([
        ndimage.convolve(ch, kernel, mode="nearest") for ch in img
    ]), 0.0, 1.0)


def _zoom_blur(img, s, _ctx):
    spec = SEVERITY_TABLE["zoom_blur"]
    max_zoom = 1.0 + (spec["max_zoom"] - 1.0) * s
    h, w = img.shape[-2:]
    acc = np.zeros_like(img)
    factors = np.linspace(1.0, max_zoom, int(spec["n_zooms"]))
    for z in factors:
        acc += _warp(img, _about_center(h, w, np.array([[z, 0, 0], [0, z, 0]])))
    return np.clip(acc / len(factors), 0.0, 1.0)


def _rotate(img, s, _ctx):
    theta = np.deg2rad(SEVERITY_TABLE["rotate"]["degrees"] * s)
    h, w = img.shape[-2:]
    mat = np.array([[np.cos(theta), -np.sin(theta), 0],
                    [np.sin(theta), np.cos(theta), 0]])
    return _warp(img, _about_center(h, w, mat))


def _scale(img, s, _ctx):
    z = 1.0 + (SEVERITY_TABLE["scale"]["zoom"] - 1.0) * s
    h, w = img.shape[-2:]
    return _warp(img, _about_center(h, w, np.array([[z, 0, 0], [0, z, 0]])))


def _shear(img, s, _ctx):
    sh = SEVERITY_TABLE["shear"]["shear"] * s
    h, w = img.shape[-2:]
    return _warp(img, _about_center(h, w, np.array([[1, sh, 0], [0, 1, 0]])))


def _translate(img, s, _ctx):
    h, w = img.shape[-2:]
    dx = SEVERITY_TABLE["translate"]["shift_frac"] * s * w
    forward = np.array([[1, 0, dx], [0, 1, 0], [0, 0, 1]], dtype=np.float64)
    return _warp(img, forward)


def _tilt(img, s, _ctx):
    h, w = img.shape[-2:]
    d = SEVERITY_TABLE["tilt"]["corner_inset_frac"] * s * (w - 1)
    src = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]], dtype=np.float64)
    dst = np.array([[d, 0], [w - 1 - d, 0], [w - 1, h - 1], [0, h - 1]],
                   dtype=np.float64)
    return _warp(img, _homography_from_points(src, dst))


def _snow(img, s, ctx):
    spec = SEVERITY_TABLE["snow"]
    threshold = spec["z_start"] - (spec["z_start"] - spec["z_end"]) * s
    mask = (ctx["field"] > threshold).astype(np.float64)
    flakes = ndimage.gaussian_filter(mask, sigma=0.5, mode="nearest")
    flakes = np.clip(flakes * min(1.0, 1.5 * s), 0.0, 1.0)
    white = spec["whitening"] * s
    out = img * (1.0 - white) + white
    return np.clip(np.maximum(out, flakes[None]), 0.0, 1.0)


def _spatter(img, s, ctx):
    spec = SEVERITY_TABLE["spatter"]
    threshold = spec["z_start"] - (spec["z_start"] - spec["z_end"]) * s
    mask = (ctx["field"] > threshold).astype(np.float64)
    blobs = ndimage.gaussian_filter(mask, sigma=0.7, mode="nearest")
    blobs = np.clip(blobs * min(1.0, 2.0 * s), 0.0, 1.0)
    return np.clip(img * (1.0 - spec["darkening"] * blobs[None]) + 0.05 * blobs[None],
                   0.0, 1.0)


_TRANSFORMS = {
    "brightness": _brightness,
    "gaussian_blur": _gaussian_blur,
    "gaussian_noise": _gaussian_noise,
    "motion_blur": _motion_blur,
    "rotate": _rotate,
    "scale": _scale,
    "shear": _shear,
    "shot_noise": _shot_noise,
    "snow": _snow,
    "spatter": _spatter,
    "speckle_noise": _speckle_noise,
    "tilt": _tilt,
    "translate": _translate,
    "zoom_blur": _zoom_blur,
}


def apply_perturbation(image: np.ndarray, ptype, severity: float,
                       image_id: str = "", rng=None) -> np.ndarray:
    """One perturbed frame of `image` (c, h, w) at the given severity fraction.

    `rng` is consumed only by the noise category. severity 0 returns a copy of
    the clean image.
    """
    ptype = ptype if isinstance(ptype, PerturbationType) else resolve_type(ptype)
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ContractError(f"image must be (c, h, w), got shape {image.shape}")
    if not 0.0 <= severity <= 1.0:
        raise ContractError(f"severity must be in [0, 1], got {severity}")
    if severity == 0.0:
        return image.copy()
    ctx = {"rng": rng}
    if ptype.key in ("snow", "spatter"):
        ctx["field"] = _field(ptype.key, image_id, image.shape[-2:])
    if ptype.key == "motion_blur":
        ctx["field_rng"] = np.random.default_rng(
            stable_seed("field", ptype.key, image_id))
    if ptype.category == "noise" and rng is None:
        raise ContractError(f"{ptype.name} requires an RNG for its draws")
    return _TRANSFORMS[ptype.key](image, float(severity), ctx)
