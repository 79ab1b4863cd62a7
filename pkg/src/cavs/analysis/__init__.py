from .metrics import (soft_dice, dice_loss, batch_dice_loss, total_loss, binarize, confusion, sensitivity,
                      specificity, iou, dice_coefficient, ConfusionCounts, MetricsRecord)
from .postprocess import connected_components, postprocess, Component
