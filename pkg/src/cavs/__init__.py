"""
cavs: segmentation of coronary angiography videos with a 3D-2D network
that fuses each target frame with its temporal neighbours.
"""
from ._version import __version__
