"""
Range checking for the hyperparameter dataclasses. Each dataclass declares a
class attribute ``limits`` mapping field names to what is allowed:

    tuple -> inclusive (low, high) range, ``None`` meaning unbounded
    list  -> the value must be one of the entries

and calls ``check_params(self)`` from ``__post_init__``.
"""
from dataclasses import fields, is_dataclass


def is_contained(value, lst):
    """
    Checks if a value is in the list of allowed values
    """
    return value in lst


def is_value_between(value, num_tuple):
    """
    Checks if value is inside the inclusive range given by a 2-tuple, either end may be None
    """
    if len(num_tuple) != 2:
        raise ValueError("Tuple must contain exactly two numbers")
    low, high = num_tuple
    if low is not None and value < low:
        return False
    if high is not None and value > high:
        return False
    return True


def raise_param_error(msg):
    raise ValueError(msg)


def check_params(instance, limits=None):
    """
    Checks every field of a dataclass instance that has an entry in ``limits``
    (defaults to the class attribute of the same name). Sequence-valued fields
    such as resolutions are checked element by element.
    """
    if not is_dataclass(instance):
        raise TypeError("check_params expects a dataclass instance")
    if limits is None:
        limits = getattr(type(instance), 'limits', {})
    names = {f.name for f in fields(instance)}
    for key, allowed in limits.items():
        if key not in names:
            continue
        value = getattr(instance, key)
        values = value if isinstance(value, (tuple, list)) else (value,)
        for v in values:
            if isinstance(allowed, tuple):
                if not is_value_between(v, allowed):
                    raise_param_error("value {!r} for {} is out of acceptable range {}".format(value, key, allowed))
            elif isinstance(allowed, list):
                if not is_contained(v, allowed):
                    raise_param_error("value {!r} for {} is not one of {}".format(value, key, allowed))
