"""Shared floating-point helpers."""


def kahan_step(total, comp, x):
    """One compensated-summation step for ``total + x``.

    Works identically on Python floats and numpy arrays; the vectorized trial
    engine relies on that to stay bitwise-equal to the scalar path.

    Returns the updated ``(total, compensation)`` pair.
    """
    y = x - comp
    t = total + y
    return t, (t - total) - y
