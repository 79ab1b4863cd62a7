"""
Flat ``key=value`` experiment files shared by the phantom generator, the
training pipeline and the command line. Values read from a file are strings;
``build`` coerces them to the types of the target dataclass defaults, and
values given on the command line win over values from the file.
"""
import logging
from dataclasses import MISSING, fields
from pathlib import Path

logger = logging.getLogger(__name__)

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


def read_config(path):
    """
    Reads a flat config file into an ordered dict of strings.

    args:
        path (str or Path): file with one ``key=value`` per line, ``#`` starts a comment
    returns:
        values (dict): key -> raw string value, later duplicates override earlier ones
    """
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValueError("{}:{}: expected key=value, got {!r}".format(path, lineno, raw))
        key, value = line.split('=', 1)
        values[key.strip().replace('-', '_')] = value.strip()
    logger.debug("read %d values from %s", len(values), path)
    return values


def write_config(values, path):
    lines = ["{}={}".format(k, format_value(v)) for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def format_value(value):
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_resolution(text):
    """
    '448' -> (448, 448), '448x320' -> (448, 320), (448, 448) passes through
    """
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    if isinstance(text, int):
        return (text, text)
    parts = str(text).lower().replace(',', 'x').split('x')
    if len(parts) == 1:
        return (int(parts[0]), int(parts[0]))
    if len(parts) == 2:
        return (int(parts[0]), int(parts[1]))
    raise ValueError("cannot parse resolution {!r}".format(text))


def parse_bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError("cannot parse boolean {!r}".format(text))


def _coerce(name, value, default):
    if value is None:
        return None
    if isinstance(default, bool):
        return parse_bool(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        if 'resolution' in name:
            return parse_resolution(value)
        if isinstance(value, str):
            return tuple(float(v) for v in value.split(','))
        return tuple(value)
    return value


def build(cls, file_values=None, overrides=None):
    """
    Instantiates dataclass ``cls`` from file values overridden by explicit ones.
    Unknown keys are rejected, ``None`` overrides are ignored.
    """
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(merged) - set(known))
    if unknown:
        raise ValueError("unknown {} keys: {}".format(cls.__name__, ", ".join(unknown)))
    kwargs = {}
    for name, value in merged.items():
        f = known[name]
        if f.default is not MISSING:
            default = f.default
        elif f.default_factory is not MISSING:
            default = f.default_factory()
        else:
            default = None
        kwargs[name] = _coerce(name, value, default)
    return cls(**kwargs)
