"""Random and structured point sets used by the verification harness and tests."""

from __future__ import annotations

import numpy as np

from .core import PointSet


def sparse_gaussian_cloud(rng: np.random.Generator, n_points: int, dim: int, density: float = 0.5, scale: float = 1.0) -> PointSet:
    X = rng.standard_normal((n_points, dim)) * (rng.random((n_points, dim)) < density)
    return PointSet.from_matrix(scale * X)


def l1_vertices(dim: int, scale: float = 1.0) -> PointSet:
    """The 2 * dim vertices +-scale * e_i of the l1 ball."""
    eye = np.eye(dim) * scale
    return PointSet.from_matrix(np.vstack([eye, -eye]))


def lacunary_fan(n_points: int, base: float = 2.0, dim: int = 1) -> PointSet:
    """Points base^-k * e_(k mod dim), k = 0..n-1, plus the origin."""
    X = np.zeros((n_points + 1, dim))
    for k in range(n_points):
        X[k + 1, k % dim] = base ** (-k)
    return PointSet.from_matrix(X)


def ellipsoid_net(rng: np.random.Generator, n_points: int, axes) -> PointSet:
    """Random points on the ellipsoid with semi-axes ``axes``."""
    axes = np.asarray(axes, dtype=float)
    g = rng.standard_normal((n_points, axes.size))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return PointSet.from_matrix(g * axes)


def two_distance_adversarial(rng: np.random.Generator, n_points: int, dim_J: int, dim_rest: int,
                             small: float = 0.01, spread: float = 0.5) -> PointSet:
    """Points nearly equal on the first ``dim_J`` coordinates and spread on the rest."""
    XJ = small * rng.standard_normal((n_points, dim_J))
    XR = spread * rng.choice([-1.0, 1.0], size=(n_points, dim_rest)) * rng.random((n_points, dim_rest))
    return PointSet.from_matrix(np.hstack([XJ, XR]))


def random_small_instance(rng: np.random.Generator, max_points: int = 8, max_dim: int = 6) -> PointSet:
    """A random sparse cloud with 1..max_points points in 1..max_dim coordinates."""
    n = int(rng.integers(1, max_points + 1))
    d = int(rng.integers(1, max_dim + 1))
    scale = float(np.exp(rng.uniform(-2, 1)))
    return sparse_gaussian_cloud(rng, n, d, float(rng.uniform(0.3, 1.0)), scale)
