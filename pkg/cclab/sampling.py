"""Deterministic point sets on spheres"""
import numpy as np


def fibonacci_sphere(count: int) -> np.ndarray:
    """Low-discrepancy unit vectors on the 2-sphere

    Parameters
    ----------
    count : int
        The number of points

    Returns
    -------
    ndarray
        An array of shape (count, 3)
    """
    golden_angle = np.pi * (3.0 - np.sqrt(5.0))
    index = np.arange(count) + 0.5
    z = 1.0 - 2.0 * index / count
    rho = np.sqrt(1.0 - z * z)
    theta = golden_angle * index
    return np.column_stack((rho * np.cos(theta), rho * np.sin(theta), z))


def random_directions(
    n: int, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniformly distributed unit vectors in R^n (normalized Gaussians)"""
    directions = rng.standard_normal((count, n))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def sphere_directions(
    n: int, count: int, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Unit vectors for sampling a sphere in R^n

    Parameters
    ----------
    n : int
        The ambient dimension
    count : int
        The number of directions
    rng : Generator, optional
        Source of randomness for n >= 4. If None is given, a generator seeded
        with 0 is used.

    Returns
    -------
    ndarray
        An array of shape (count, n)

    Notes
    -----
    In three dimensions the Fibonacci lattice is used. In higher dimensions
    there's no equally cheap low-discrepancy construction, so the directions
    are drawn at random.
    """
    if n == 3:
        return fibonacci_sphere(count)
    return random_directions(n, count, rng or np.random.default_rng(0))
