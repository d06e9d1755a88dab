"""Quadtree background mesh with cut-cell classification and faces."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .const import (
    CELL_CUT,
    CELL_IMMERSED,
    CELL_INTERIOR,
    CLASSIFY_SAFETY,
    CLASSIFY_SUBSAMPLE_LEVELS,
    FACE_BOX_BOUNDARY,
    FACE_INTERFACE,
    FACE_LEVELSET_BOUNDARY,
    MAX_TREE_LEVEL,
    ROOT_SAMPLES,
)
from .exceptions import MeshError
from .geometry import LevelSetGeometry

_LOGGER = logging.getLogger(__name__)

Key = tuple[int, int, int]


@dataclass
class Cell:
    """Leaf of the background quadtree."""

    id: int
    key: Key
    bounds: np.ndarray
    kind: str
    node: int | None = None
    face_ids: list[int] = field(default_factory=list)

    @property
    def live(self) -> bool:
        """Return True unless the cell is immersed."""
        return self.kind != CELL_IMMERSED

    @property
    def centroid(self) -> np.ndarray:
        """Centroid of the uncut box."""
        return self.bounds.mean(axis=1)

    @property
    def widths(self) -> np.ndarray:
        """Edge lengths per axis."""
        return self.bounds[:, 1] - self.bounds[:, 0]

    @property
    def area(self) -> float:
        """Area of the uncut box."""
        return float(np.prod(self.widths))

    @property
    def corners(self) -> np.ndarray:
        """Box corners."""
        (x0, x1), (y0, y1) = self.bounds
        return np.array([[x0, y0], [x1, y0], [x0, y1], [x1, y1]])


@dataclass
class Face:
    """Shared facet, box boundary facet or level-set boundary segment."""

    id: int
    kind: str
    side_neg: int | None
    side_pos: int | None
    axis: int | None = None
    coord: float | None = None
    extent: tuple[float, float] | None = None
    cut: bool = False

    @property
    def cells(self) -> list[int]:
        """Adjacent cell ids."""
        return [c for c in (self.side_neg, self.side_pos) if c is not None]

    def outward_sign(self, cell_id: int) -> float:
        """Sign of the +axis normal as seen outward from cell_id."""
        return 1.0 if cell_id == self.side_neg else -1.0

    def endpoints(self) -> np.ndarray:
        """Segment end points of an axis-aligned face."""
        lo, hi = self.extent
        if self.axis == 0:
            return np.array([[self.coord, lo], [self.coord, hi]])
        return np.array([[lo, self.coord], [hi, self.coord]])

    @property
    def length(self) -> float:
        """Uncut length of an axis-aligned face."""
        return self.extent[1] - self.extent[0]


@dataclass
class BackgroundMesh:
    """Leaves, faces and the lookup tables of the quadtree."""

    geometry: LevelSetGeometry
    cells: list[Cell]
    faces: list[Face]
    min_cut_size: np.ndarray
    node_cell: np.ndarray

    @property
    def live_cells(self) -> list[Cell]:
        """Cells that take part in operator construction."""
        return [cell for cell in self.cells if cell.live]

    @property
    def interfaces(self) -> list[Face]:
        """Faces shared by two live cells."""
        return [face for face in self.faces if face.kind == FACE_INTERFACE]

    @property
    def boundary_faces(self) -> list[Face]:
        """Box and level-set boundary faces."""
        return [face for face in self.faces if face.kind != FACE_INTERFACE]

    def faces_of(self, cell: Cell) -> list[Face]:
        """Faces bounding a cell."""
        return [self.faces[fid] for fid in cell.face_ids]


def key_bounds(geometry: LevelSetGeometry, key: Key) -> np.ndarray:
    """Physical box of a quadtree key."""
    level, i, j = key
    n = 2**level
    width = geometry.upper - geometry.lower
    lo = geometry.lower + width * np.array([i, j]) / n
    hi = geometry.lower + width * np.array([i + 1, j + 1]) / n
    return np.stack([lo, hi], axis=1)


def _grid(bounds: np.ndarray, n: int) -> np.ndarray:
    xs = np.linspace(bounds[0, 0], bounds[0, 1], n)
    ys = np.linspace(bounds[1, 0], bounds[1, 1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=-1)


def _mixed(values: np.ndarray) -> bool:
    return bool(np.any(values > 0.0) and np.any(values < 0.0))


def classify_cell(
    bounds: np.ndarray,
    geometry: LevelSetGeometry,
    points: np.ndarray | None = None,
) -> str:
    """Classify a box as interior, cut or immersed by sign sampling."""
    if not geometry.has_levelset:
        return CELL_INTERIOR
    samples = _grid(bounds, 3)
    if points is not None and len(points):
        samples = np.vstack([samples, points])
    values = geometry.levelset(samples)
    if _mixed(values) or np.all(values == 0.0):
        return CELL_CUT
    positive = bool(np.all(values >= 0.0))
    if points is not None and len(points) and not positive:
        # a node with phi >= 0 keeps the cell live
        return CELL_CUT
    kind = CELL_INTERIOR if positive else CELL_IMMERSED
    diagonal = float(np.linalg.norm(bounds[:, 1] - bounds[:, 0]))
    lipschitz = float(np.linalg.norm(geometry.gradient(samples), axis=-1).max())
    if np.abs(values).min() >= CLASSIFY_SAFETY * diagonal * lipschitz:
        return kind
    for level in range(1, CLASSIFY_SUBSAMPLE_LEVELS + 1):
        if _mixed(geometry.levelset(_grid(bounds, 2 ** (level + 1) + 1))):
            return CELL_CUT
    return kind


class _QuadTree:
    """Build-time quadtree state."""

    def __init__(self, geometry: LevelSetGeometry, coords: np.ndarray) -> None:
        """Init."""
        self.geometry = geometry
        self.coords = coords
        self.leaves: dict[Key, list[int]] = {}
        self.internal: set[Key] = set()
        self.kinds: dict[Key, str] = {}

    def refine_nodes(self) -> None:
        """Split until every leaf holds at most one node."""
        stack: list[tuple[Key, np.ndarray]] = [((0, 0, 0), np.arange(len(self.coords)))]
        while stack:
            key, idx = stack.pop()
            if len(idx) <= 1:
                self.leaves[key] = [int(i) for i in idx]
                continue
            if key[0] >= MAX_TREE_LEVEL:
                raise MeshError(f"Nodes {idx.tolist()} coincide to within tree resolution")
            self.internal.add(key)
            for child, mask in self._split(key, idx):
                stack.append((child, idx[mask]))

    def _split(self, key: Key, idx: np.ndarray):
        level, i, j = key
        mid = key_bounds(self.geometry, key).mean(axis=1)
        right = self.coords[idx, 0] >= mid[0]
        top = self.coords[idx, 1] >= mid[1]
        for di in (0, 1):
            for dj in (0, 1):
                mask = (right == bool(di)) & (top == bool(dj))
                yield (level + 1, 2 * i + di, 2 * j + dj), mask

    def classify(self, key: Key) -> str:
        """Classify and remember a leaf."""
        nodes = self.leaves[key]
        kind = classify_cell(
            key_bounds(self.geometry, key),
            self.geometry,
            self.coords[nodes] if nodes else None,
        )
        self.kinds[key] = kind
        return kind

    def refine_cut(self, min_cut_size: np.ndarray) -> None:
        """Split cut leaves until their edges reach the minimum size."""
        queue = [key for key in sorted(self.leaves) if self.classify(key) == CELL_CUT]
        while queue:
            key = queue.pop()
            widths = np.diff(key_bounds(self.geometry, key), axis=1).ravel()
            if np.all(widths <= min_cut_size * (1.0 + 1e-12)):
                continue
            if key[0] >= MAX_TREE_LEVEL:
                raise MeshError(f"Cut refinement of {key} exceeds tree depth")
            nodes = np.asarray(self.leaves.pop(key), dtype=int)
            del self.kinds[key]
            self.internal.add(key)
            for child, mask in self._split(key, nodes):
                self.leaves[child] = [int(i) for i in nodes[mask]]
                if self.classify(child) == CELL_CUT:
                    queue.append(child)

    def leaf_at(self, key: Key) -> Key | None:
        """Leaf covering key, or None if key is refined further."""
        level, i, j = key
        while level >= 0:
            if (level, i, j) in self.leaves:
                return (level, i, j)
            if (level, i, j) in self.internal:
                return None
            level, i, j = level - 1, i // 2, j // 2
        raise MeshError(f"Key {key} outside quadtree")

    def leaves_along(self, key: Key, axis: int, upper: bool) -> list[Key]:
        """Leaves below key touching its lower or upper side along axis."""
        if key in self.leaves:
            return [key]
        level, i, j = key
        found: list[Key] = []
        side = 1 if upper else 0
        for k in (0, 1):
            if axis == 0:
                child = (level + 1, 2 * i + side, 2 * j + k)
            else:
                child = (level + 1, 2 * i + k, 2 * j + side)
            found.extend(self.leaves_along(child, axis, upper))
        return found


def _segment_live(geometry: LevelSetGeometry, points: np.ndarray) -> bool:
    if not geometry.has_levelset:
        return True
    t = np.linspace(0.0, 1.0, ROOT_SAMPLES + 1)[:, None]
    return bool(np.any(geometry.levelset(points[0] + t * (points[1] - points[0])) > 0.0))


def _segment_cut(geometry: LevelSetGeometry, points: np.ndarray) -> bool:
    if not geometry.has_levelset:
        return False
    t = np.linspace(0.0, 1.0, ROOT_SAMPLES + 1)[:, None]
    values = geometry.levelset(points[0] + t * (points[1] - points[0]))
    return _mixed(values) or bool(np.all(values <= 0.0))


def build_mesh(
    geometry: LevelSetGeometry,
    nodes: np.ndarray,
    min_cut_size: float | np.ndarray | None = None,
) -> BackgroundMesh:
    """Build the background quadtree, classify cells and enumerate faces."""
    coords = np.asarray(getattr(nodes, "coords", nodes), dtype=float)
    if len(coords) == 0:
        raise MeshError("No nodes to build a mesh from")
    outside = ~geometry.contains(coords)
    if np.any(outside):
        raise MeshError(f"Nodes {np.flatnonzero(outside).tolist()} lie outside the box")
    tree = _QuadTree(geometry, coords)
    tree.refine_nodes()
    if min_cut_size is None:
        sized = [key for key, held in tree.leaves.items() if held]
        widths = np.array([np.diff(key_bounds(geometry, k), axis=1).ravel() for k in sized])
        min_cut = np.median(widths, axis=0) / 2.0
    else:
        min_cut = np.broadcast_to(np.asarray(min_cut_size, dtype=float), (2,)).copy()
        if np.any(min_cut <= 0.0):
            raise MeshError(f"min_cut_size must be positive, got {min_cut_size}")
    tree.refine_cut(min_cut)

    keys = sorted(tree.leaves)
    ids = {key: cid for cid, key in enumerate(keys)}
    cells: list[Cell] = []
    node_cell = np.full(len(coords), -1, dtype=int)
    for key in keys:
        held = tree.leaves[key]
        cell = Cell(ids[key], key, key_bounds(geometry, key), tree.kinds.get(key) or tree.classify(key))
        if held:
            cell.node = held[0]
            node_cell[held[0]] = cell.id
        cells.append(cell)

    faces: list[Face] = []

    def add(face: Face) -> None:
        face.id = len(faces)
        faces.append(face)
        for cid in face.cells:
            cells[cid].face_ids.append(face.id)

    for key in keys:
        cell = cells[ids[key]]
        if not cell.live:
            continue
        level, i, j = key
        n = 2**level
        for axis in (0, 1):
            index = (i, j)[axis]
            lo_coord, hi_coord = cell.bounds[axis]
            extent = tuple(cell.bounds[1 - axis])
            if index == 0:
                add(_axis_face(geometry, FACE_BOX_BOUNDARY, None, cell.id, axis, lo_coord, extent))
            if index + 1 == n:
                add(_axis_face(geometry, FACE_BOX_BOUNDARY, cell.id, None, axis, hi_coord, extent))
                continue
            step = (level, i + 1, j) if axis == 0 else (level, i, j + 1)
            owner = tree.leaf_at(step)
            if owner is not None:
                neighbors = [owner]
            else:
                neighbors = tree.leaves_along(step, axis, upper=False)
            for nkey in neighbors:
                other = cells[ids[nkey]]
                if nkey[0] > level:
                    shared = tuple(other.bounds[1 - axis])
                else:
                    shared = extent
                if not other.live:
                    face = _axis_face(geometry, FACE_INTERFACE, cell.id, other.id, axis, hi_coord, shared)
                    if _segment_live(geometry, face.endpoints()):
                        _LOGGER.warning(
                            "Dropping face between cell %s and immersed cell %s with a live part",
                            cell.id,
                            other.id,
                        )
                    continue
                add(_axis_face(geometry, FACE_INTERFACE, cell.id, other.id, axis, hi_coord, shared))
        if cell.kind == CELL_CUT:
            add(Face(-1, FACE_LEVELSET_BOUNDARY, cell.id, None, cut=True))

    _LOGGER.debug(
        "Mesh has %s leaves (%s live) and %s faces",
        len(cells),
        sum(c.live for c in cells),
        len(faces),
    )
    return BackgroundMesh(geometry, cells, faces, min_cut, node_cell)


def _axis_face(
    geometry: LevelSetGeometry,
    kind: str,
    side_neg: int | None,
    side_pos: int | None,
    axis: int,
    coord: float,
    extent: tuple[float, float],
) -> Face:
    face = Face(-1, kind, side_neg, side_pos, axis, float(coord), (float(extent[0]), float(extent[1])))
    face.cut = _segment_cut(geometry, face.endpoints())
    return face
