import pytest

from cavs.cli import run
from cavs.data.dataset import load_dataset

SUBCOMMANDS = ['phantom', 'train', 'eval', 'segment', 'gradcheck', 'info']


@pytest.fixture
def dataset(tmp_path):
    root = tmp_path / 'data'
    code = run(['-q', 'phantom', '--out', str(root), '--clips', '2', '--frames', '10', '--size', '32',
                '--depth', '2', '--radius', '1,2', '--speed', '6', '--blobs', '2', '--seed', '7'])
    assert code == 0
    return root


@pytest.fixture
def checkpoint(tmp_path, dataset):
    path = tmp_path / 'model.ckpt'
    code = run(['-q', 'train', '--data', str(dataset), '--n', '1', '--size', '32', '--base-channels', '8',
                '--epochs', '1', '--checkpoint', str(path), '--log', str(tmp_path / 'log.csv')])
    assert code == 0
    return path


def test_phantom_writes_clips(tmp_path):
    root = tmp_path / 'four'
    assert run(['-q', 'phantom', '--out', str(root), '--frames', '6', '--size', '16', '--seed', '7']) == 0
    clips = load_dataset(root)
    assert len(clips) == 4
    assert all(len(c) == 6 and c.resolution == (16, 16) for c in clips)
    assert (root / 'phantom.txt').exists()


def test_phantom_reads_config_file(tmp_path):
    cfg = tmp_path / 'phantom.cfg'
    cfg.write_text("n_clips=1\nframes=7\nresolution=16\n")
    root = tmp_path / 'one'
    assert run(['-q', 'phantom', '--config', str(cfg), '--out', str(root)]) == 0
    clips = load_dataset(root)
    assert len(clips) == 1 and len(clips[0]) == 7


def test_train_writes_outputs(capsys, tmp_path, checkpoint):
    assert checkpoint.exists()
    assert (tmp_path / 'model.best.ckpt').exists()
    assert (tmp_path / 'log.csv').exists()
    assert 'checkpoint=' in capsys.readouterr().out


def test_info(checkpoint, capsys):
    assert run(['-q', 'info', str(checkpoint)]) == 0
    out = capsys.readouterr().out
    assert 'N=1' in out
    assert 'frames=3' in out
    assert 'resolution=32x32' in out


def test_eval_writes_reports(tmp_path, dataset, checkpoint, capsys):
    prefix = tmp_path / 'scores'
    assert run(['-q', 'eval', '--data', str(dataset), '--checkpoint', str(checkpoint), '--out', str(prefix)]) == 0
    assert 'postprocessed_mean' in capsys.readouterr().out
    assert (tmp_path / 'scores_summary.csv').exists()


def test_segment_writes_masks(tmp_path, dataset, checkpoint):
    out = tmp_path / 'masks'
    clip_dir = sorted(p for p in dataset.iterdir() if p.is_dir())[0]
    assert run(['-q', 'segment', '--clip', str(clip_dir), '--checkpoint', str(checkpoint), '--out', str(out)]) == 0
    assert len(list(out.glob('*.png'))) == 10


def test_segment_rejects_other_n(tmp_path, dataset, checkpoint, capsys):
    clip_dir = sorted(p for p in dataset.iterdir() if p.is_dir())[0]
    code = run(['-q', 'segment', '--clip', str(clip_dir), '--checkpoint', str(checkpoint), '--out',
                str(tmp_path / 'm'), '--n', '2'])
    assert code == 1
    assert 'ConfigMismatchError' in capsys.readouterr().err


def test_truncated_checkpoint_exits_one(tmp_path, checkpoint, capsys):
    broken = tmp_path / 'broken.ckpt'
    broken.write_bytes(checkpoint.read_bytes()[:20])
    assert run(['-q', 'info', str(broken)]) == 1
    assert 'truncated' in capsys.readouterr().err


def test_missing_data_exits_one(tmp_path, capsys):
    assert run(['-q', 'train', '--data', str(tmp_path / 'nowhere')]) == 1
    assert 'DatasetError' in capsys.readouterr().err


@pytest.mark.parametrize('argv', [[], ['train'], ['phantom', '--clips', 'many', '--out', 'x'], ['bogus']])
def test_bad_usage_exits_two(argv):
    assert run(argv) == 2


@pytest.mark.parametrize('command', SUBCOMMANDS)
def test_help(command):
    assert run([command, '--help']) == 0


def test_gradcheck_ops(capsys):
    assert run(['-q', 'gradcheck', '--scope', 'ops', '--seed', '0']) == 0
    assert 'FAIL' not in capsys.readouterr().out


def test_segment_overlays(tmp_path, dataset, checkpoint):
    out = tmp_path / 'overlays'
    clip_dir = sorted(p for p in dataset.iterdir() if p.is_dir())[1]
    assert run(['-q', 'segment', '--clip', str(clip_dir), '--checkpoint', str(checkpoint), '--out', str(out),
                '--overlay']) == 0
    assert len(list(out.glob('overlay_*.png'))) == 10


def test_gradcheck_reads_config_file(tmp_path, capsys):
    cfg = tmp_path / 'grad.cfg'
    cfg.write_text("scope=network\nseed=0\n")
    assert run(['-q', 'gradcheck', '--config', str(cfg), '--scope', 'ops']) == 0
    rows = [line.split()[0] for line in capsys.readouterr().out.splitlines()[1:]]
    assert rows and 'network' not in rows


def test_gradcheck_config_picks_scope(tmp_path, capsys):
    cfg = tmp_path / 'grad.cfg'
    cfg.write_text("scope=ops\n")
    assert run(['-q', 'gradcheck', '--config', str(cfg)]) == 0
    assert 'network' not in capsys.readouterr().out


@pytest.mark.parametrize('command', ['gradcheck', 'eval', 'segment', 'info'])
def test_unknown_config_key_exits_one(tmp_path, dataset, checkpoint, capsys, command):
    cfg = tmp_path / 'bad.cfg'
    cfg.write_text("bogus_key=1\n")
    clip_dir = sorted(p for p in dataset.iterdir() if p.is_dir())[0]
    argv = {
        'gradcheck': ['gradcheck', '--scope', 'ops'],
        'eval': ['eval', '--data', str(dataset), '--checkpoint', str(checkpoint), '--out', str(tmp_path / 's')],
        'segment': ['segment', '--clip', str(clip_dir), '--checkpoint', str(checkpoint),
                    '--out', str(tmp_path / 'm')],
        'info': ['info', str(checkpoint)],
    }[command]
    assert run(['-q'] + argv + ['--config', str(cfg)]) == 1
    assert 'bogus_key' in capsys.readouterr().err


def test_segment_config_n_checked_against_checkpoint(tmp_path, dataset, checkpoint, capsys):
    cfg = tmp_path / 'seg.cfg'
    cfg.write_text("N=2\n")
    clip_dir = sorted(p for p in dataset.iterdir() if p.is_dir())[0]
    code = run(['-q', 'segment', '--config', str(cfg), '--clip', str(clip_dir), '--checkpoint', str(checkpoint),
                '--out', str(tmp_path / 'm')])
    assert code == 1
    assert 'ConfigMismatchError' in capsys.readouterr().err


def test_segment_config_overlay(tmp_path, dataset, checkpoint):
    cfg = tmp_path / 'seg.cfg'
    cfg.write_text("overlay=yes\nthreshold=0.5\n")
    out = tmp_path / 'overlays'
    clip_dir = sorted(p for p in dataset.iterdir() if p.is_dir())[0]
    assert run(['-q', 'segment', '--config', str(cfg), '--clip', str(clip_dir), '--checkpoint', str(checkpoint),
                '--out', str(out)]) == 0
    assert len(list(out.glob('overlay_*.png'))) == 10
