"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own machinery: rotation
matrices are built from explicit trig expressions (not scipy), nearest
neighbors by exhaustive scan (not a k-d tree), so implementation and test
can only agree by computing the same mathematics.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import settings

from pcedit import OrientedBox, PointCloud

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


def oracle_rotation(rx: float, ry: float, rz: float) -> np.ndarray:
    """Rz @ Ry @ Rx from hand-written trig (degrees, intrinsic z-y'-x'')."""
    ax, ay, az = math.radians(rx), math.radians(ry), math.radians(rz)
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rot_x = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    rot_y = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rot_z = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rot_z @ rot_y @ rot_x


def oracle_contains(positions: np.ndarray, box: OrientedBox) -> np.ndarray:
    """Boundary-inclusive containment via the explicit rotation oracle."""
    rot = oracle_rotation(*box.rotations)
    local = (rot.T @ (np.asarray(positions, dtype=np.float64)
                      - np.asarray(box.centroid)).T).T
    half = np.asarray(box.dimensions) / 2.0
    return np.all(np.abs(local) <= half, axis=1)


def oracle_nearest_index(positions: np.ndarray, candidate_rows: np.ndarray,
                         query: np.ndarray) -> int:
    """Exhaustive nearest-candidate scan; ties -> lowest row index."""
    best_row, best_dist = -1, math.inf
    for row in candidate_rows:
        dist = math.dist(positions[row], query)
        if dist < best_dist:
            best_row, best_dist = int(row), dist
    return best_row


def random_box(rng: np.random.Generator, span: float = 10.0) -> OrientedBox:
    return OrientedBox(
        label=f"b{rng.integers(1_000_000)}",
        centroid=tuple(rng.uniform(-span, span, 3)),
        dimensions=tuple(rng.uniform(0.5, span, 3)),
        rotations=tuple(rng.uniform(0.0, 360.0, 3)),
    )


def random_cloud(rng: np.random.Generator, n: int, span: float = 10.0,
                 normals: bool = False) -> PointCloud:
    return PointCloud(
        positions=rng.uniform(-span, span, (n, 3)),
        colors=rng.integers(0, 256, (n, 3)),
        normals=rng.normal(size=(n, 3)) if normals else None,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
