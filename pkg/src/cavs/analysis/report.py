"""
Tabular output of evaluation and training: one row per test image, or per
training step, written as comma separated text through pandas.
"""
import pandas as pd

from .metrics import dice_from_counts, iou_from_counts, sensitivity, specificity

REPORT_COLUMNS = ['clip_id', 'frame_index', 'iou', 'sensitivity', 'specificity', 'dice']
METRICS = ['iou', 'sensitivity', 'specificity', 'dice']


def records_frame(records):
    """MetricsRecord list -> DataFrame with the report columns"""
    return pd.DataFrame([r.as_dict() for r in records], columns=REPORT_COLUMNS)


def mean_metrics(records):
    """per-image (macro) averages"""
    frame = records_frame(records)
    return {m: float(frame[m].mean()) for m in METRICS}


def pooled_metrics(counts):
    """metrics of the summed confusion counts (micro averages)"""
    total = counts[0]
    for c in counts[1:]:
        total = total + c
    return {'iou': iou_from_counts(total), 'sensitivity': sensitivity(total),
            'specificity': specificity(total), 'dice': dice_from_counts(total)}


def write_metrics_report(records, path, float_format='%.6f'):
    """
    Writes one row per image followed by a 'mean' row, returns the DataFrame written.
    """
    frame = records_frame(records)
    means = mean_metrics(records)
    summary = pd.DataFrame([dict(clip_id='mean', frame_index=-1, **means)], columns=REPORT_COLUMNS)
    out = pd.concat([frame, summary], ignore_index=True)
    out.to_csv(path, index=False, float_format=float_format)
    return out


def summary_frame(summary):
    """nested {variant: {metric: value}} -> DataFrame indexed by variant"""
    return pd.DataFrame.from_dict(summary, orient='index')[METRICS]
