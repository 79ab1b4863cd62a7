"""
Synthetic angiography clips with exact ground truth.

A phantom is a branching tree of tubes (quadratic curve segments whose
radius shrinks every generation) that fills with contrast agent from the
root outwards, moves with a periodic cardiac-like deformation and is drawn
darker than a smooth textured background, with additive and
signal-dependent noise on top. The label of a frame is the support of the
contrast-filled tubes in that frame. With ``occlusion`` set, a second short
vessel slides back and forth across one of the tree's tubes so that the two
overlap in some frames and are apart in others.
"""
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Tuple

import numpy as np
from numba import njit
from scipy.ndimage import gaussian_filter

from ..config import write_config
from ..params import check_params, raise_param_error
from .dataset import Clip, save_clip

logger = logging.getLogger(__name__)

BACKGROUND_LEVEL = 0.75
BACKGROUND_TEXTURE = 0.12
#: darkness at the rim of a tube relative to its centre line
RIM_FRACTION = 0.35
PLACEMENT_ATTEMPTS = 50


@dataclass(frozen=True)
class PhantomParams:
    branching_depth: int = 3
    radius_range: Tuple[float, float] = (1.0, 3.0)
    front_speed: float = 4.0
    motion_amplitude: float = 2.0
    motion_period: int = 12
    noise_std: float = 0.03
    noise_scale: float = 0.03
    blob_count: int = 6
    occlusion: bool = False
    resolution: Tuple[int, int] = (64, 64)
    frames: int = 24
    seed: int = 0
    contrast: float = 0.45
    fps: float = 15.0

    limits = {
        'branching_depth': (0, 8),
        'radius_range': (0.5, 64.0),
        'front_speed': (0.01, None),
        'motion_amplitude': (0.0, None),
        'motion_period': (2, None),
        'noise_std': (0.0, 1.0),
        'noise_scale': (0.0, 1.0),
        'blob_count': (0, 100000),
        'resolution': (8, 4096),
        'frames': (1, None),
        'seed': (0, 2 ** 32 - 1),
        'contrast': (0.05, 0.75),
        'fps': (0.01, None),
    }

    def __post_init__(self):
        resolution = self.resolution
        if np.isscalar(resolution):
            resolution = (resolution, resolution)
        object.__setattr__(self, 'resolution', tuple(int(v) for v in resolution))
        object.__setattr__(self, 'radius_range', tuple(float(v) for v in self.radius_range))
        if len(self.resolution) != 2 or len(self.radius_range) != 2:
            raise_param_error("resolution and radius_range take two values each")
        check_params(self)
        if self.radius_range[0] > self.radius_range[1]:
            raise_param_error("radius_range {} is not (min, max)".format(self.radius_range))
        if self.occlusion and self.frames <= self.motion_period // 2:
            raise_param_error("occlusion needs more than motion_period // 2 = {} frames, got {}".format(
                self.motion_period // 2, self.frames))


@dataclass
class VesselTree:
    """Centre-line samples of every tube, (y, x) coordinates in pixels."""
    points: np.ndarray
    tangents: np.ndarray
    radius: np.ndarray
    arclength: np.ndarray
    branch: np.ndarray

    def fill_frame(self, front_speed):
        """first frame in which each sample is reached by the contrast front"""
        return np.maximum(0, np.ceil(self.arclength / front_speed - 1.0)).astype(np.int64)


### GEOMETRY ###

def _quadratic_segment(p0, p1, p2, step=0.5):
    chord = np.linalg.norm(p2 - p0) + np.linalg.norm(p1 - p0) + np.linalg.norm(p2 - p1)
    t = np.linspace(0.0, 1.0, max(2, int(np.ceil(chord / (2 * step)))) + 1)[:, None]
    points = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2
    tangents = 2 * (1 - t) * (p1 - p0) + 2 * t * (p2 - p1)
    tangents /= np.maximum(np.linalg.norm(tangents, axis=1, keepdims=True), 1e-12)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    return points, tangents, arc


def grow_tree(rng, params):
    """
    Random tree entering the image from one edge and heading for the centre.
    Every segment splits into two children at depth < branching_depth.
    """
    h, w = params.resolution
    r_min, r_max = params.radius_range
    side = rng.integers(4)
    along = rng.uniform(0.3, 0.7)
    margin = 0.08
    start = [(margin * h, along * w), ((1 - margin) * h, along * w),
             (along * h, margin * w), (along * h, (1 - margin) * w)][side]
    start = np.array(start)
    angle = math.atan2(h / 2 - start[0], w / 2 - start[1]) + rng.uniform(-0.3, 0.3)
    parts = []

    def segment(p0, angle, length, radius, s0, depth):
        direction = np.array([math.sin(angle), math.cos(angle)])
        normal = np.array([math.cos(angle), -math.sin(angle)])
        p2 = p0 + length * direction
        p1 = (p0 + p2) / 2 + normal * rng.uniform(-0.25, 0.25) * length
        points, tangents, arc = _quadratic_segment(p0, p1, p2)
        parts.append((points, tangents, np.full(len(points), radius), s0 + arc, np.full(len(points), len(parts))))
        if depth < params.branching_depth:
            for sign in (-1.0, 1.0):
                child = angle + sign * rng.uniform(0.35, 0.8)
                segment(p2, child, 0.7 * length, max(r_min, 0.7 * radius), s0 + arc[-1], depth + 1)

    segment(start, angle, 0.45 * min(h, w), r_max, 0.0, 0)
    return VesselTree(*(np.concatenate(column) for column in zip(*parts)))


def cardiac_phase(t, period):
    return math.sin(2 * math.pi * t / period)


def displace(points, t, params, heading):
    """
    Periodic deformation of frame t: a shift of up to motion_amplitude pixels
    along ``heading`` plus a matching contraction about the image centre.
    """
    h, w = params.resolution
    s = cardiac_phase(t, params.motion_period)
    amplitude = params.motion_amplitude
    centre = np.array([h / 2, w / 2])
    scale = 1.0 + 0.5 * amplitude / min(h, w) * s
    shift = amplitude * s * np.array([math.sin(heading), math.cos(heading)])
    return centre + (points - centre) * scale + shift


### RENDERING ###

@njit(cache=True)
def _stamp_disks(ys, xs, radii, contrast, rim, dark, label):
    H, W = dark.shape
    for i in range(ys.shape[0]):
        cy = ys[i]
        cx = xs[i]
        r = radii[i]
        r2 = r * r
        y0 = max(0, int(math.floor(cy - r)))
        y1 = min(H - 1, int(math.ceil(cy + r)))
        x0 = max(0, int(math.floor(cx - r)))
        x1 = min(W - 1, int(math.ceil(cx + r)))
        for y in range(y0, y1 + 1):
            for x in range(x0, x1 + 1):
                d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx)
                if d2 <= r2:
                    label[y, x] = 1
                    v = contrast * (rim + (1.0 - rim) * math.sqrt(1.0 - d2 / r2))
                    if v > dark[y, x]:
                        dark[y, x] = v


def render_tubes(points, radius, params, dark=None, label=None):
    """
    Stamps tubes given by centre-line samples.

    returns:
        dark (ndarray): float64 (H, W) attenuation, strongest tube wins where tubes overlap
        label (ndarray): uint8 (H, W) tube support
    """
    shape = params.resolution
    dark = np.zeros(shape) if dark is None else dark
    label = np.zeros(shape, dtype=np.uint8) if label is None else label
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    _stamp_disks(points[:, 0].copy(), points[:, 1].copy(), np.ascontiguousarray(radius, dtype=np.float64),
                 float(params.contrast), RIM_FRACTION, dark, label)
    return dark, label


def background(rng, params):
    """flat level plus smooth blobs, no vessel-like structure"""
    shape = params.resolution
    base = np.full(shape, BACKGROUND_LEVEL)
    if params.blob_count:
        impulses = np.zeros(shape)
        ys = rng.integers(0, shape[0], params.blob_count)
        xs = rng.integers(0, shape[1], params.blob_count)
        np.add.at(impulses, (ys, xs), rng.uniform(-1.0, 1.0, params.blob_count))
        texture = gaussian_filter(impulses, sigma=min(shape) / 10, mode='wrap')
        peak = np.abs(texture).max()
        if peak > 0:
            base += BACKGROUND_TEXTURE * texture / peak
    return base


def add_noise(rng, image, params):
    """additive Gaussian noise plus noise growing with the square root of the signal"""
    noisy = image.copy()
    if params.noise_std:
        noisy += params.noise_std * rng.standard_normal(image.shape)
    if params.noise_scale:
        noisy += params.noise_scale * np.sqrt(np.clip(image, 0.0, None)) * rng.standard_normal(image.shape)
    return noisy


def to_uint8(image):
    return np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)


### OCCLUSION CROSSING ###

@dataclass
class Crossing:
    """Straight tube parallel to the tree at ``anchor`` that slides along ``normal``."""
    anchor: np.ndarray
    direction: np.ndarray
    normal: np.ndarray
    radius: float
    length: float
    amplitude: float

    def offset(self, t, period):
        return self.amplitude * (1.0 - math.cos(2 * math.pi * t / period)) / 2

    def centre_line(self, t, period):
        s = np.linspace(-self.length / 2, self.length / 2, max(2, int(np.ceil(2 * self.length))) + 1)[:, None]
        return self.anchor + self.normal * self.offset(t, period) + s * self.direction


def place_crossing(rng, tree, tree_labels, params, heading):
    """
    Picks a tree sample and checks that the sliding tube overlaps the filled
    tree in at least one frame and is clear of it in another, retrying with
    other anchors until both happen.
    """
    r_cross = params.radius_range[0]
    fill = tree.fill_frame(params.front_speed)
    candidates = np.flatnonzero(fill == 0)
    if candidates.size == 0:
        candidates = np.flatnonzero(fill < params.frames)
    for attempt in range(PLACEMENT_ATTEMPTS):
        i = int(rng.choice(candidates))
        r_tree = float(tree.radius[i])
        direction = tree.tangents[i]
        crossing = Crossing(anchor=tree.points[i], direction=direction,
                            normal=np.array([direction[1], -direction[0]]) * rng.choice([-1.0, 1.0]),
                            radius=r_cross, length=4 * (r_tree + r_cross) + 6,
                            amplitude=4.0 / 3.0 * (r_tree + r_cross + 2) + 1)
        overlaps = []
        for t in range(params.frames):
            line = displace(crossing.centre_line(t, params.motion_period), t, params, heading)
            _, label = render_tubes(line, np.full(len(line), r_cross), params)
            overlaps.append(int(np.count_nonzero(label & tree_labels[t])))
        if max(overlaps) > 0 and min(overlaps) == 0:
            logger.debug("occlusion crossing placed after %d attempts", attempt + 1)
            return crossing
    raise ValueError("could not place an occlusion crossing in {} attempts, try more frames or a faster front".format(
        PLACEMENT_ATTEMPTS))


### CLIPS ###

def gen_phantom(params, clip_id=None):
    """
    Renders one phantom clip, bit-identical for identical params.

    args:
        params (PhantomParams): geometry, motion, noise and size
        clip_id (str): defaults to phantom_<seed>
    returns:
        Clip with uint8 frames and {0, 1} labels
    """
    seed = params.seed
    rng_geometry = np.random.default_rng([seed, 0])
    rng_background = np.random.default_rng([seed, 1])
    rng_noise = np.random.default_rng([seed, 2])
    rng_crossing = np.random.default_rng([seed, 3])

    tree = grow_tree(rng_geometry, params)
    heading = rng_geometry.uniform(0, 2 * math.pi)
    fill = tree.fill_frame(params.front_speed)
    rendered = []
    for t in range(params.frames):
        filled = fill <= t
        moved = displace(tree.points[filled], t, params, heading)
        rendered.append(render_tubes(moved, tree.radius[filled], params))

    crossing = None
    if params.occlusion:
        crossing = place_crossing(rng_crossing, tree, [label for _, label in rendered], params, heading)

    base = background(rng_background, params)
    frames, labels = [], []
    for t, (dark, label) in enumerate(rendered):
        if crossing is not None:
            line = displace(crossing.centre_line(t, params.motion_period), t, params, heading)
            render_tubes(line, np.full(len(line), crossing.radius), params, dark, label)
        frames.append(to_uint8(add_noise(rng_noise, base - dark, params)))
        labels.append(label)
    return Clip(clip_id or "phantom_{}".format(seed), frames, labels, frame_rate=params.fps)


def clip_seeds(n_clips, seed):
    """per-clip seeds derived from a master seed"""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_clips)]


def gen_phantom_dataset(n_clips, params, seed, root):
    """
    Writes n_clips phantoms in the load_dataset layout plus a phantom.txt
    manifest of the generator settings.

    returns:
        clip directories written
    """
    if n_clips < 1:
        raise_param_error("n_clips must be at least 1, got {}".format(n_clips))
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for i, clip_seed in enumerate(clip_seeds(n_clips, seed)):
        clip = gen_phantom(replace(params, seed=clip_seed), clip_id="clip_{:03d}".format(i))
        written.append(save_clip(clip, root))
        logger.debug("wrote %s (seed %d)", clip.id, clip_seed)
    manifest = asdict(params)
    manifest.update(seed=seed, n_clips=n_clips)
    write_config(manifest, root / 'phantom.txt')
    logger.info("wrote %d phantom clips to %s", n_clips, root)
    return written
