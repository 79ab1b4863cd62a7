"""
Clip datasets on disk and the temporal bookkeeping around them: the
per-clip train/test cut, edge padding and sliding windows of 2N+1 frames.

Layout::

    <root>/<clip_id>/frames/00000.png ...
    <root>/<clip_id>/labels/00000.png ...
    <root>/<clip_id>/meta.txt            optional, "fps=<float>"
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..config import read_config
from ..errors import DatasetError
from .preprocess import preprocess_frame, preprocess_mask

logger = logging.getLogger(__name__)

#: one test frame in six
TEST_FRACTION = 6
MIN_CLIP_LENGTH = 6
FRAME_DIGITS = 5


@dataclass
class Clip:
    """
    One angiography sequence. ``start`` is the index of frames[0] in the
    original clip, so slices keep their position for bookkeeping.
    """
    id: str
    frames: List[np.ndarray]
    labels: List[np.ndarray]
    frame_rate: Optional[float] = None
    start: int = 0

    def __post_init__(self):
        if len(self.frames) != len(self.labels):
            raise DatasetError("clip {}: {} frames but {} labels".format(self.id, len(self.frames), len(self.labels)))
        shapes = {np.shape(f)[:2] for f in self.frames} | {np.shape(m)[:2] for m in self.labels}
        if len(shapes) > 1:
            raise DatasetError("clip {}: mixed resolutions {}".format(self.id, sorted(shapes)))

    def __len__(self):
        return len(self.frames)

    @property
    def resolution(self):
        return np.shape(self.frames[0])[:2] if self.frames else None

    @property
    def indices(self):
        """original frame indices covered by this clip or slice"""
        return list(range(self.start, self.start + len(self)))

    def slice(self, begin, end):
        return replace(self, frames=self.frames[begin:end], labels=self.labels[begin:end], start=self.start + begin)


@dataclass
class ClipSample:
    window: np.ndarray
    target_mask: np.ndarray
    clip_id: str = ''
    center_index: int = 0

    @property
    def frames(self):
        return self.window.shape[0]


@dataclass
class Partition:
    train: List[Clip] = field(default_factory=list)
    test: List[Clip] = field(default_factory=list)
    test_first: bool = True

    def __iter__(self):
        return iter((self.train, self.test))


### DISK I/O ###

def _read_image(path, clip_id):
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert('L'))
    except (OSError, UnidentifiedImageError) as exc:
        raise DatasetError("clip {}: cannot read {}: {}".format(clip_id, path, exc)) from exc


def _image_files(directory):
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == '.png')


def read_frame_rate(clip_dir):
    meta = Path(clip_dir) / 'meta.txt'
    if not meta.exists():
        return None
    value = read_config(meta).get('fps')
    return float(value) if value is not None else None


def load_clip(clip_dir, labels=True):
    """
    Reads one clip directory. With labels=False only frames/ is needed and
    the labels are empty masks.
    """
    clip_dir = Path(clip_dir)
    clip_id = clip_dir.name
    frame_dir, label_dir = clip_dir / 'frames', clip_dir / 'labels'
    if not frame_dir.is_dir() or (labels and not label_dir.is_dir()):
        raise DatasetError("clip {}: expected frames/ and labels/ directories".format(clip_id))
    frame_files = _image_files(frame_dir)
    if not labels:
        frames = [_read_image(p, clip_id) for p in frame_files]
        return Clip(clip_id, frames, [np.zeros(f.shape, dtype=np.uint8) for f in frames],
                    frame_rate=read_frame_rate(clip_dir))
    label_files = _image_files(label_dir)
    if len(frame_files) != len(label_files):
        raise DatasetError("clip {}: {} frames but {} labels".format(clip_id, len(frame_files), len(label_files)))
    frames = [_read_image(p, clip_id) for p in frame_files]
    masks = [(_read_image(p, clip_id) > 0).astype(np.uint8) for p in label_files]
    return Clip(clip_id, frames, masks, frame_rate=read_frame_rate(clip_dir))


def load_dataset(root):
    """
    Loads every clip directory under root, sorted by clip id.

    args:
        root (str or Path): dataset directory
    returns:
        clips (list of Clip)
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError("dataset root {} is not a directory".format(root))
    clips = [load_clip(d) for d in sorted(p for p in root.iterdir() if p.is_dir())]
    if not clips:
        logger.warning("no clips found under %s", root)
    else:
        logger.info("loaded %d clips, %d frames from %s", len(clips), sum(len(c) for c in clips), root)
    return clips


def save_clip(clip, root):
    """writes the load_dataset layout for one clip, masks as 0/255"""
    clip_dir = Path(root) / clip.id
    (clip_dir / 'frames').mkdir(parents=True, exist_ok=True)
    (clip_dir / 'labels').mkdir(parents=True, exist_ok=True)
    for i, (frame, label) in enumerate(zip(clip.frames, clip.labels)):
        name = "{:0{}d}.png".format(i, FRAME_DIGITS)
        Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(clip_dir / 'frames' / name)
        Image.fromarray((np.asarray(label) > 0).astype(np.uint8) * 255).save(clip_dir / 'labels' / name)
    if clip.frame_rate is not None:
        (clip_dir / 'meta.txt').write_text("fps={:g}\n".format(clip.frame_rate))
    return clip_dir


### TEMPORAL SPLIT AND WINDOWS ###

def holdout_size(length):
    """frames held out from a clip of ``length``: one sixth rounded half up, at least one"""
    return max(1, int(np.floor(length / TEST_FRACTION + 0.5)))


def partition(clips, seed):
    """
    Cuts every clip into one contiguous test slice and one contiguous train
    slice. Whether the test slice is the front or the back of the clips is
    drawn once from ``seed`` and applies to all clips of the run.

    returns:
        Partition (unpacks as train, test)
    """
    for clip in clips:
        if len(clip) < MIN_CLIP_LENGTH:
            raise DatasetError("clip {} has {} frames, at least {} are needed for the train/test cut".format(
                clip.id, len(clip), MIN_CLIP_LENGTH))
    test_first = bool(np.random.default_rng(seed).random() < 0.5)
    result = Partition(test_first=test_first)
    for clip in clips:
        k = holdout_size(len(clip))
        if test_first:
            result.test.append(clip.slice(0, k))
            result.train.append(clip.slice(k, len(clip)))
        else:
            result.train.append(clip.slice(0, len(clip) - k))
            result.test.append(clip.slice(len(clip) - k, len(clip)))
    logger.debug("partition seed %s: test slices at the %s", seed, 'front' if test_first else 'back')
    return result


def pad_temporal(frames, N):
    """N copies of the first frame in front, N copies of the last at the back"""
    frames = list(frames)
    if not frames:
        raise ValueError("cannot pad an empty frame sequence")
    return [frames[0]] * N + frames + [frames[-1]] * N


def window_samples(padded, labels, N, clip_id='', start=0):
    """
    One sample per original frame: sample i stacks padded[i : i + 2N + 1]
    and targets labels[i].
    """
    k = len(padded) - 2 * N
    if k != len(labels):
        raise ValueError("padded length {} does not match {} labels with N={}".format(len(padded), len(labels), N))
    return [ClipSample(np.stack(padded[i:i + 2 * N + 1]), labels[i], clip_id, start + i) for i in range(k)]


def clip_samples(clip, N, resolution):
    """preprocess the frames and labels of a clip or slice, then pad and window them"""
    frames = [preprocess_frame(f, resolution) for f in clip.frames]
    labels = [preprocess_mask(m, resolution) for m in clip.labels]
    return window_samples(pad_temporal(frames, N), labels, N, clip.id, clip.start)


def dataset_samples(clips, N, resolution):
    samples = []
    for clip in clips:
        samples.extend(clip_samples(clip, N, resolution))
    return samples


def stack_batch(samples):
    """samples -> frames (B, 1, 2N+1, H, W) float32 and targets (B, 1, H, W) float32"""
    frames = np.stack([s.window for s in samples])[:, None]
    targets = np.stack([s.target_mask for s in samples])[:, None].astype(np.float32)
    return frames, targets
