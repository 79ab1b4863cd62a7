from .dataset import (Clip, ClipSample, Partition, load_dataset, load_clip, save_clip, partition, holdout_size,
                      pad_temporal, window_samples, clip_samples, dataset_samples, stack_batch)
from .preprocess import preprocess, preprocess_frame, preprocess_mask, to_luminance
from .phantom import PhantomParams, gen_phantom, gen_phantom_dataset
