"""Thread-pool plumbing shared by the grid and ball scans"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

LOGGER = logging.getLogger(__name__)

THREADS_ENVVAR = "CCLAB_THREADS"

# chunking never depends on the thread count so results are bit-identical
CHUNK_SIZE = 8192

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None = None) -> int:
    """Determine how many worker threads to use

    Parameters
    ----------
    threads : int, optional
        An explicitly requested thread count. If None is given, the
        `CCLAB_THREADS` environment variable is consulted, and failing that,
        the number of available cores.

    Returns
    -------
    int
        A positive thread count

    Raises
    ------
    ValueError
        If the requested (or configured) thread count is not a positive integer
    """
    if threads is None:
        from_env = os.environ.get(THREADS_ENVVAR)
        if from_env:
            try:
                threads = int(from_env)
            except ValueError as not_an_int:
                raise ValueError(
                    f"{THREADS_ENVVAR} must be an integer, not {from_env!r}"
                ) from not_an_int
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError("The number of threads must be at least 1")
    return threads


def parallel_map(
    func: Callable[[T], R], items: Iterable[T], threads: int | None = 1
) -> list[R]:
    """Apply a function to each item, preserving order

    Parameters
    ----------
    func : callable
        The function to apply. It must not mutate shared state.
    items : iterable
        The inputs
    threads : int, optional
        The number of worker threads. Default is 1 (run serially in the
        calling thread). Pass None to resolve the count from the environment.

    Returns
    -------
    list
        The results, in the same order as `items`
    """
    threads = resolve_threads(threads)
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [func(item) for item in items]
    LOGGER.debug("Mapping %d tasks over %d threads", len(items), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def evaluate_in_chunks(
    func: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    threads: int | None = 1,
    chunk_size: int = CHUNK_SIZE,
) -> np.ndarray:
    """Evaluate a vectorized function over a (possibly large) array of points

    Parameters
    ----------
    func : callable
        A function taking an array of shape (m, ...) and returning an array
        whose leading axis has length m
    points : ndarray
        The points to evaluate, stacked along the first axis
    threads : int, optional
        The number of worker threads. Default is 1.
    chunk_size : int, optional
        The number of points handed to each call of `func`

    Returns
    -------
    ndarray
        The concatenated results
    """
    if len(points) <= chunk_size:
        return func(points)
    chunks = [
        points[start : start + chunk_size]
        for start in range(0, len(points), chunk_size)
    ]
    return np.concatenate(parallel_map(func, chunks, threads))
