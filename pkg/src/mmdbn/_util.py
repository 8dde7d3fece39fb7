from __future__ import annotations

from collections.abc import Iterable, Iterator

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "all_binary_states",
    "as_binary_array",
    "as_tuple_of_int",
    "ceil_divide",
    "iter_minibatches",
]


def as_tuple_of_int(ints: int | Iterable[int]) -> tuple[int, ...]:
    """
    Convert the input to a tuple of ints.

    Parameters
    ----------
    ints : int or iterable of int
        One or more integers.

    Returns
    -------
    out : tuple of int
        Tuple containing the inputs.
    """
    try:
        return (int(ints),)  # type: ignore
    except TypeError:
        return tuple([int(i) for i in ints])  # type: ignore


def ceil_divide(n: ArrayLike, d: ArrayLike) -> NDArray:
    """
    Return the smallest integer greater than or equal to the quotient of the inputs.

    Computes integer division of dividend `n` by divisor `d`, rounding up instead of
    truncating.

    Parameters
    ----------
    n : array_like
        Numerator.
    d : array_like
        Denominator.

    Returns
    -------
    q : numpy.ndarray
        Quotient.
    """
    n = np.asanyarray(n)
    d = np.asanyarray(d)
    return (n + d - np.sign(d)) // d


def as_binary_array(x: ArrayLike, *, name: str = "input") -> NDArray[np.uint8]:
    """
    Convert the input to an array of 0/1 values.

    Parameters
    ----------
    x : array_like
        Input values. Every element must be 0 or 1 (booleans are accepted).
    name : str, optional
        Name of the quantity, used in error messages. Defaults to "input".

    Returns
    -------
    out : numpy.ndarray
        The input as a `uint8` array with the same shape.

    Raises
    ------
    ValueError
        If any element is not 0 or 1.
    """
    arr = np.asarray(x)
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must contain only 0 and 1 values")
    return arr.astype(np.uint8)


def all_binary_states(n: int) -> NDArray[np.uint8]:
    """
    Enumerate every binary vector of length `n`.

    States are listed in lexicographic order, with the first element varying
    slowest.

    Parameters
    ----------
    n : int
        Vector length. Must be >= 0.

    Returns
    -------
    states : numpy.ndarray
        A ``(2**n, n)`` array whose rows are all distinct binary vectors.
    """
    if n < 0:
        raise ValueError("state length must be >= 0")
    codes = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def iter_minibatches(
    n: int,
    batch_size: int,
    rng: np.random.Generator | None = None,
) -> Iterator[NDArray[np.intp]]:
    """
    Yield row indices of consecutive minibatches.

    Parameters
    ----------
    n : int
        Number of rows. Must be >= 1.
    batch_size : int
        Maximum number of rows per minibatch. Must be >= 1. The last minibatch may
        be smaller.
    rng : numpy.random.Generator or None, optional
        If not None, rows are visited in an order drawn from this generator.
        Otherwise rows are visited in their original order. Defaults to None.

    Yields
    ------
    idx : numpy.ndarray
        Row indices of the next minibatch.
    """
    if n < 1:
        raise ValueError("number of rows must be >= 1")
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")

    order = np.arange(n) if rng is None else rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]
