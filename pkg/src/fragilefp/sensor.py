"""Synthetic camera: ground-truth PRNU, scene generators and the capture model.

Capture follows ``I = I0 + I0 * K + Gamma`` with i.i.d. Gaussian ``Gamma``,
clamped to [0, 255]. All generators are deterministic under their seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import BLOCK, block_idct, check_same_shape, from_blocks
from .errors import ParameterError

DEFAULT_SIZE = 512


def make_rng(*keys) -> np.random.Generator:
    """Generator seeded from a tuple of non-negative integers (master seed, cell index, ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


@dataclass(frozen=True)
class SyntheticCamera:
    prnu: np.ndarray = field(repr=False)
    sigma_prnu: float = 0.01
    sigma_gamma: float = 2.0
    seed: int = 0

    @property
    def shape(self):
        return self.prnu.shape

    def to_dict(self) -> dict:
        h, w = self.shape
        return dict(sigma_prnu=self.sigma_prnu, sigma_gamma=self.sigma_gamma,
                    seed=self.seed, height=h, width=w)


def new_camera(sigma_prnu: float = 0.01, sigma_gamma: float = 2.0, seed: int = 0,
               height: int = DEFAULT_SIZE, width: int = DEFAULT_SIZE) -> SyntheticCamera:
    if height <= 0 or width <= 0:
        raise ParameterError(f"camera dimensions must be positive, got {height}x{width}")
    if sigma_prnu < 0 or sigma_gamma < 0:
        raise ParameterError("noise standard deviations must be non-negative")
    prnu = make_rng(seed, 0).normal(0.0, sigma_prnu, size=(height, width))
    prnu -= prnu.mean()
    prnu.flags.writeable = False
    return SyntheticCamera(prnu, float(sigma_prnu), float(sigma_gamma), int(seed))


SCENE_KINDS = ("flat_field", "laplacian_synthetic", "textured")


@dataclass(frozen=True)
class SceneSpec:
    """Scene generator parameters.

    ``scale_range`` bounds the Laplace scale ``b`` (density ``exp(-|x|/b) / 2b``)
    drawn per AC subband for ``laplacian_synthetic`` scenes.
    """

    kind: str = "textured"
    intensity: float = 128.0
    height: int = DEFAULT_SIZE
    width: int = DEFAULT_SIZE
    scale_range: tuple[float, float] = (1.0, 12.0)
    corr_length: float = 4.0

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ParameterError(f"unknown scene kind {self.kind!r}")
        if not 0 < self.intensity <= 255:
            raise ParameterError(f"intensity must lie in (0, 255], got {self.intensity}")
        if self.height <= 0 or self.width <= 0 or self.height % BLOCK or self.width % BLOCK:
            raise ParameterError("scene dimensions must be positive multiples of 8")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ParameterError(f"invalid Laplace scale range {self.scale_range}")
        if self.corr_length <= 0:
            raise ParameterError("corr_length must be positive")

    def to_dict(self) -> dict:
        return dict(kind=self.kind, intensity=self.intensity, height=self.height,
                    width=self.width, scale_range=list(self.scale_range),
                    corr_length=self.corr_length)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if "scale_range" in d:
            d["scale_range"] = tuple(d["scale_range"])
        return cls(**d)


def laplacian_scene(spec: SceneSpec, seed: int):
    """Laplacian-subband scene and the 8x8 table of Laplace scales it was drawn with.

    The DC entry of the returned scale table is 0 (DC is fixed at ``intensity``).
    """
    rng = make_rng(seed, 1)
    lo, hi = spec.scale_range
    scales = rng.uniform(lo, hi, size=(BLOCK, BLOCK))
    scales[0, 0] = 0.0
    nr, nc = spec.height // BLOCK, spec.width // BLOCK
    coeffs = rng.laplace(0.0, 1.0, size=(nr, nc, BLOCK, BLOCK)) * scales
    coeffs[..., 0, 0] = BLOCK * spec.intensity
    img = np.clip(block_idct(from_blocks(coeffs)), 0.0, 255.0)
    return img, scales


def render_scene(spec: SceneSpec, seed: int) -> np.ndarray:
    shape = (spec.height, spec.width)
    if spec.kind == "flat_field":
        return np.full(shape, float(spec.intensity))
    if spec.kind == "laplacian_synthetic":
        return laplacian_scene(spec, seed)[0]
    field_ = gaussian_filter(make_rng(seed, 2).normal(size=shape), spec.corr_length, mode="wrap")
    lo, hi = field_.min(), field_.max()
    return 255.0 * (0.2 + 0.6 * (field_ - lo) / (hi - lo))


def capture(cam: SyntheticCamera, scene, seed: int) -> np.ndarray:
    scene = np.asarray(scene, dtype=np.float64)
    check_same_shape(scene, cam.prnu)
    img = scene + scene * cam.prnu
    if cam.sigma_gamma > 0:
        img = img + make_rng(seed, 3).normal(0.0, cam.sigma_gamma, size=scene.shape)
    return np.clip(img, 0.0, 255.0)


def capture_many(cam: SyntheticCamera, spec: SceneSpec, seeds) -> list[np.ndarray]:
    """Render and capture one scene per seed (scene and sensor noise share the seed)."""
    return [capture(cam, render_scene(spec, s), s) for s in seeds]

