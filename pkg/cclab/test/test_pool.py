"""Tests for thread resolution, chunked evaluation and sphere sampling"""
import numpy as np
import pytest

from cclab import _pool
from cclab.sampling import fibonacci_sphere, random_directions, sphere_directions


class TestResolveThreads:
    def test_explicit_count_wins(self, monkeypatch):
        monkeypatch.setenv(_pool.THREADS_ENVVAR, "7")
        assert _pool.resolve_threads(3) == 3

    def test_environment(self, monkeypatch):
        monkeypatch.setenv(_pool.THREADS_ENVVAR, "7")
        assert _pool.resolve_threads() == 7

    def test_falls_back_to_the_core_count(self, monkeypatch):
        monkeypatch.delenv(_pool.THREADS_ENVVAR, raising=False)
        assert _pool.resolve_threads() >= 1

    @pytest.mark.parametrize("value", ("many", "0"))
    def test_bad_environment(self, monkeypatch, value):
        monkeypatch.setenv(_pool.THREADS_ENVVAR, value)
        with pytest.raises(ValueError):
            _pool.resolve_threads()


class TestParallel:
    def test_map_keeps_order(self):
        assert _pool.parallel_map(lambda x: x * x, range(10), threads=4) == [
            x * x for x in range(10)
        ]

    @pytest.mark.parametrize("threads", (1, 3))
    def test_chunks_are_reassembled_in_order(self, threads):
        points = np.arange(50.0).reshape(25, 2)
        values = _pool.evaluate_in_chunks(
            lambda chunk: chunk.sum(axis=1), points, threads, chunk_size=4
        )
        assert values.tolist() == points.sum(axis=1).tolist()


class TestSphereSampling:
    def test_fibonacci_points_are_unit_vectors(self):
        points = fibonacci_sphere(100)
        assert np.allclose(np.linalg.norm(points, axis=1), 1)
        assert abs(points.mean(axis=0)).max() < 0.02

    def test_random_directions_are_unit_vectors(self):
        directions = random_directions(5, 20, np.random.default_rng(0))
        assert directions.shape == (20, 5)
        assert np.allclose(np.linalg.norm(directions, axis=1), 1)

    def test_default_directions_are_reproducible(self):
        assert np.array_equal(sphere_directions(4, 10), sphere_directions(4, 10))
