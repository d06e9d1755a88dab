"""Shared fixtures for pointsbp tests."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest

from pointsbp import SbpBuild, SbpBuilder
from pointsbp.const import (
    CELL_INTERIOR,
    FACE_BOX_BOUNDARY,
    FACE_INTERFACE,
    GEOMETRY_BOX,
    TAU_AUTO,
    TAU_SMALL,
)
from pointsbp.geometry import LevelSetGeometry, NodeSet, SamplerConfig, make_geometry
from pointsbp.mesh import BackgroundMesh, Cell, Face


def pytest_addoption(parser):
    """Register --runslow."""
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run acceptance-scale tests"
    )


def pytest_collection_modifyitems(config, items):
    """Skip slow tests unless asked for."""
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def uniform_box_mesh(geometry: LevelSetGeometry, n: int) -> BackgroundMesh:
    """n x n uncut cells with +x/+y interfaces and box faces."""
    lo, hi = geometry.lower, geometry.upper
    xs = np.linspace(lo[0], hi[0], n + 1)
    ys = np.linspace(lo[1], hi[1], n + 1)
    cells = []
    for i in range(n):
        for j in range(n):
            bounds = np.array([[xs[i], xs[i + 1]], [ys[j], ys[j + 1]]])
            cells.append(Cell(i * n + j, (0, i, j), bounds, CELL_INTERIOR))
    faces: list[Face] = []

    def add(face: Face) -> None:
        face.id = len(faces)
        faces.append(face)
        for cid in face.cells:
            cells[cid].face_ids.append(face.id)

    for i in range(n):
        for j in range(n):
            cid = i * n + j
            if i == 0:
                add(Face(-1, FACE_BOX_BOUNDARY, None, cid, 0, xs[0], (ys[j], ys[j + 1])))
            if j == 0:
                add(Face(-1, FACE_BOX_BOUNDARY, None, cid, 1, ys[0], (xs[i], xs[i + 1])))
            if i + 1 < n:
                add(Face(-1, FACE_INTERFACE, cid, cid + n, 0, xs[i + 1], (ys[j], ys[j + 1])))
            else:
                add(Face(-1, FACE_BOX_BOUNDARY, cid, None, 0, xs[n], (ys[j], ys[j + 1])))
            if j + 1 < n:
                add(Face(-1, FACE_INTERFACE, cid, cid + 1, 1, ys[j + 1], (xs[i], xs[i + 1])))
            else:
                add(Face(-1, FACE_BOX_BOUNDARY, cid, None, 1, ys[n], (xs[i], xs[i + 1])))
    width = (hi - lo) / n
    return BackgroundMesh(geometry, cells, faces, width, np.full(0, -1))


def lattice_nodes(n: int, jitter: float = 0.2, seed: int = 3) -> NodeSet:
    """Perturbed n x n lattice on the unit square."""
    rng = np.random.Generator(np.random.PCG64(seed))
    t = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(t, t, indexing="ij")
    coords = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    coords += rng.uniform(-jitter, jitter, coords.shape) / n
    return NodeSet(coords, seed, 1.0 / n, np.full(n * n, 1.0 / n**2), n)


@lru_cache(maxsize=None)
def sampled_build(
    kind: str, resolution, p: int, seed: int = 0, tau=TAU_AUTO, beta: float = 0.0
) -> SbpBuild:
    """Cached pipeline run for a sampler."""
    sampler = SamplerConfig(kind, resolution, beta=beta, seed=seed)
    return SbpBuilder(p, tau=tau).build_sampled(sampler)


@lru_cache(maxsize=None)
def uniform_build(n_cells: int, n_nodes: int, p: int) -> SbpBuild:
    """Cached pipeline run on a uniform uncut mesh."""
    geometry = make_geometry(GEOMETRY_BOX)
    mesh = uniform_box_mesh(geometry, n_cells)
    return SbpBuilder(p, tau=TAU_SMALL).build(geometry, lattice_nodes(n_nodes), mesh)


@pytest.fixture
def box():
    """Unit square without a level set."""
    return make_geometry(GEOMETRY_BOX)


@pytest.fixture(scope="session")
def oracle_build() -> SbpBuild:
    """p=1 on a 3 x 3 uncut mesh."""
    return uniform_build(3, 6, 1)


@pytest.fixture(scope="session")
def box_build() -> SbpBuild:
    """p=1 on a quadtree over a perturbed box lattice."""
    return sampled_build("box", 8, 1)


@pytest.fixture(scope="session")
def circle_build() -> SbpBuild:
    """p=2 on the box with a circular hole, small tolerance."""
    return sampled_build("box_circle", 10, 2, tau=TAU_SMALL)


@pytest.fixture(scope="session")
def annulus_build() -> SbpBuild:
    """p=1 on a coarse annulus, small tolerance."""
    return sampled_build("annulus", 4, 1, tau=TAU_SMALL)
