from .config import TrainConfig
from .train import TrainLog, train, train_step, epoch_order
from .evaluate import Evaluation, predict, evaluate, evaluate_clips, score_predictions, segment_video, segment_masks
