"""
Figures for training runs and predictions, written straight to image files.
"""
import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402


def plot_training_log(steps, epochs, path, title=None):
    """
    Loss per step and per-epoch mean loss / train IOU.

    args:
        steps (DataFrame): columns step, loss
        epochs (DataFrame): columns epoch, mean_loss, train_iou
        path (str or Path): output image
    """
    fig, (ax_loss, ax_iou) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(steps['step'], steps['loss'], lw=0.8, label='step')
    if len(epochs):
        per_epoch = max(1, len(steps) // max(1, len(epochs)))
        ax_loss.plot(epochs['epoch'] * per_epoch, epochs['mean_loss'], 'o-', label='epoch mean')
    ax_loss.set_xlabel('step')
    ax_loss.set_ylabel('loss')
    ax_loss.legend()
    ax_iou.plot(epochs['epoch'], epochs['train_iou'], 'o-')
    ax_iou.set_xlabel('epoch')
    ax_iou.set_ylabel('train IOU')
    ax_iou.set_ylim(0, 1)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_overlay(frame, pred, path, target=None, title=None):
    """frame, ground truth when given, and prediction side by side"""
    panels = [(frame, 'frame')]
    if target is not None:
        panels.append((target, 'ground truth'))
    panels.append((pred, 'prediction'))
    fig, axes = plt.subplots(1, len(panels), figsize=(3 * len(panels), 3))
    for ax, (image, name) in zip(axes, panels):
        ax.imshow(image, cmap='gray', vmin=0, vmax=1)
        ax.set_title(name)
        ax.axis('off')
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_trend(results, path):
    """
    Test IOU per model variant.

    args:
        results (DataFrame): columns variant, seed, test_iou
    """
    fig, ax = plt.subplots(figsize=(5, 4))
    variants = list(dict.fromkeys(results['variant']))
    data = [results.loc[results['variant'] == v, 'test_iou'].values for v in variants]
    ax.boxplot(data)
    ax.set_xticks(range(1, len(variants) + 1))
    ax.set_xticklabels(variants)
    ax.set_ylabel('test IOU (post-processed)')
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
