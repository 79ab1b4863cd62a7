"""
Image preparation: luminance conversion, resizing to the network resolution
and scaling to [0, 1]. Frames are resized bilinearly, masks with nearest
neighbour and then re-binarised so labels stay strictly {0, 1}.
"""
import numpy as np
from PIL import Image

from ..errors import DatasetError


def _check_image(image):
    image = np.asarray(image)
    if image.size == 0:
        raise DatasetError("empty image")
    if image.ndim == 3 and image.shape[2] in (3, 4):
        image = to_luminance(image)
    if image.ndim != 2:
        raise DatasetError("expected a grayscale (H, W) or RGB (H, W, 3) image, got shape {}".format(image.shape))
    return image


def to_luminance(rgb):
    """(H, W, 3|4) RGB(A) uint8 -> (H, W) uint8, ITU-R 601 weights as Pillow's convert('L')"""
    rgb = np.asarray(rgb)
    if rgb.dtype == np.uint8:
        return np.asarray(Image.fromarray(np.ascontiguousarray(rgb[..., :3])).convert('L'))
    weights = np.array([0.299, 0.587, 0.114])
    return rgb[..., :3] @ weights


def _target_size(resolution):
    if np.isscalar(resolution):
        resolution = (resolution, resolution)
    return int(resolution[0]), int(resolution[1])


def preprocess_frame(image, resolution):
    """
    Frame -> float32 (H, W) in [0, 1] at ``resolution``.

    args:
        image (ndarray): uint8 grayscale or RGB, or float already in [0, 1]
        resolution (int or (H, W)): target size
    """
    image = _check_image(image)
    h, w = _target_size(resolution)
    if image.dtype == np.uint8:
        if image.shape != (h, w):
            image = np.asarray(Image.fromarray(image).resize((w, h), Image.BILINEAR))
        return image.astype(np.float32) / np.float32(255.0)
    image = image.astype(np.float32)
    if image.shape != (h, w):
        image = np.asarray(Image.fromarray(image).resize((w, h), Image.BILINEAR))
    return np.clip(image, 0.0, 1.0)


def preprocess_mask(mask, resolution):
    """Mask -> uint8 (H, W) in {0, 1} at ``resolution``; any nonzero pixel is foreground"""
    mask = _check_image(mask)
    h, w = _target_size(resolution)
    binary = (mask > 0).astype(np.uint8)
    if binary.shape != (h, w):
        binary = np.asarray(Image.fromarray(binary * 255).resize((w, h), Image.NEAREST))
    return (binary > 0).astype(np.uint8)


def preprocess(image, resolution, mask=False):
    """dispatches to preprocess_mask or preprocess_frame"""
    return preprocess_mask(image, resolution) if mask else preprocess_frame(image, resolution)
