"""
Connected-component clean-up of predicted masks: small islands are dropped
and the major parts of the vessel tree are kept.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

#: 8-connectivity
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Component:
    label: int
    area: int


def connected_components(mask):
    """
    Labels the 8-connected foreground components of a binary mask.

    returns:
        labels (ndarray): int32 image, 0 is background, components numbered from 1 in scan order
        components (list of Component): sorted by area descending, ties by label
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("expected a 2D mask, got shape {}".format(mask.shape))
    labels, count = ndimage.label(mask.astype(bool), structure=EIGHT_CONNECTED)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    components = [Component(label, int(areas[label])) for label in range(1, count + 1)]
    components.sort(key=lambda c: (-c.area, c.label))
    return labels.astype(np.int32), components


def postprocess(mask, tau=0.05):
    """
    Drops every component whose area is below tau times the largest component's area.

    args:
        mask (ndarray): binary (H, W) mask
        tau (float): relative area threshold in [0, 1], 0 keeps everything
    returns:
        cleaned (ndarray): uint8 mask, a subset of the input
    """
    if not 0 <= tau <= 1:
        raise ValueError("tau must lie in [0, 1], got {}".format(tau))
    labels, components = connected_components(mask)
    if not components:
        return np.zeros(labels.shape, dtype=np.uint8)
    cutoff = tau * components[0].area
    keep = np.zeros(len(components) + 1, dtype=bool)
    for component in components:
        keep[component.label] = component.area >= cutoff
    return keep[labels].astype(np.uint8)
