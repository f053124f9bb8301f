"""Planar lattices, finite regions and exterior contours.

Vertices are integer pairs. The square lattice uses the standard basis, the
triangular lattice uses axial coordinates (embedded at ``(2i + j, j)`` up to a
vertical scale), and the hexagonal lattice is stored as the brick-wall
subgraph of the square lattice. All three embeddings therefore have integer
coordinates and planarity can be checked exactly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, PreconditionError, WindowTooSmallError

Vertex = tuple[int, int]

KINDS = ("square", "triangular", "hexagonal")
MAX_DEGREE = {"square": 4, "triangular": 6, "hexagonal": 3}

_SQUARE_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))
_TRIANGULAR_STEPS = ((1, 0), (0, 1), (1, -1), (-1, 0), (0, -1), (-1, 1))


def _check_kind(kind: str) -> str:
    if kind not in MAX_DEGREE:
        raise ConfigurationError(
            f"unsupported lattice kind {kind!r}; expected one of {', '.join(KINDS)}"
        )
    return kind


def lattice_neighbours(kind: str, v: Vertex) -> tuple[Vertex, ...]:
    """Neighbours of ``v`` in the infinite lattice of the given kind."""
    i, j = v
    if kind == "square":
        return tuple((i + a, j + b) for a, b in _SQUARE_STEPS)
    if kind == "triangular":
        return tuple((i + a, j + b) for a, b in _TRIANGULAR_STEPS)
    if kind == "hexagonal":
        vertical = (i, j + 1) if (i + j) % 2 == 0 else (i, j - 1)
        return ((i + 1, j), (i - 1, j), vertical)
    raise ConfigurationError(f"unsupported lattice kind {kind!r}")


def oriented_out_edges(kind: str, v: Vertex) -> tuple[Vertex, ...]:
    """Heads ``y`` of the canonically oriented edges ``v -> y``.

    Every undirected edge appears exactly once over all tails, and the
    orientation is invariant under the lattice translations.
    """
    i, j = v
    if kind == "square":
        return ((i + 1, j), (i, j + 1))
    if kind == "triangular":
        return ((i + 1, j), (i, j + 1), (i + 1, j - 1))
    if kind == "hexagonal":
        if (i + j) % 2 == 0:
            return ((i + 1, j), (i, j + 1))
        return ((i + 1, j),)
    raise ConfigurationError(f"unsupported lattice kind {kind!r}")


def embed(kind: str, v: Vertex) -> tuple[int, int]:
    """Integer planar coordinates (vertical axis rescaled for triangular)."""
    i, j = v
    if kind == "triangular":
        return (2 * i + j, j)
    return (i, j)


def graph_ball(kind: str, center: Vertex, n: int) -> dict[Vertex, int]:
    """Vertices within graph distance ``n`` of ``center``, with distances."""
    dist = {center: 0}
    queue = deque([center])
    while queue:
        v = queue.popleft()
        d = dist[v]
        if d == n:
            continue
        for w in lattice_neighbours(kind, v):
            if w not in dist:
                dist[w] = d + 1
                queue.append(w)
    return dist


@dataclass(frozen=True, eq=False)
class PlanarLattice:
    """A finite window of one of the built-in planar lattices.

    The window is the graph ball of radius ``radius`` around ``root``; the
    adjacency lists are restricted to the window.
    """

    kind: str
    radius: int
    root: Vertex = (0, 0)
    vertices: tuple[Vertex, ...] = field(init=False)
    adjacency: Mapping[Vertex, tuple[Vertex, ...]] = field(init=False, repr=False)
    max_degree: int = field(init=False)

    def __post_init__(self):
        _check_kind(self.kind)
        if self.radius < 0:
            raise ConfigurationError("lattice window radius must be >= 0")
        dist = graph_ball(self.kind, self.root, self.radius)
        verts = tuple(sorted(dist))
        vset = set(verts)
        adj = {
            v: tuple(w for w in lattice_neighbours(self.kind, v) if w in vset)
            for v in verts
        }
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "max_degree", MAX_DEGREE[self.kind])
        object.__setattr__(self, "_distance", dist)

    def __contains__(self, v) -> bool:
        return v in self.adjacency

    def neighbours(self, v: Vertex) -> tuple[Vertex, ...]:
        return lattice_neighbours(self.kind, v)

    def distance(self, v: Vertex) -> int:
        """Graph distance from the root (window vertices only)."""
        return self._distance[v]

    def ball(self, n: int, center: Vertex | None = None) -> frozenset[Vertex]:
        return frozenset(graph_ball(self.kind, self.root if center is None else center, n))

    def edges(self) -> list[tuple[Vertex, Vertex]]:
        """Oriented edges with both endpoints in the window."""
        return [
            (v, w)
            for v in self.vertices
            for w in oriented_out_edges(self.kind, v)
            if w in self.adjacency
        ]

    def region(self, sites: Iterable[Vertex], root: Vertex | None = None) -> "Region":
        return Region(self, frozenset(sites), root)


def find_edge_crossings(lattice: PlanarLattice) -> list[tuple]:
    """Pairs of window edges whose embedded segments cross.

    Segments sharing an endpoint are not counted. Exact integer arithmetic.
    """

    def orient(p, q, r):
        val = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        return (val > 0) - (val < 0)

    def on_segment(p, q, r):
        return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(
            p[1], r[1]
        )

    segs = [(e, embed(lattice.kind, e[0]), embed(lattice.kind, e[1])) for e in lattice.edges()]
    crossings = []
    for a in range(len(segs)):
        ea, p1, p2 = segs[a]
        for b in range(a + 1, len(segs)):
            eb, q1, q2 = segs[b]
            if set(ea) & set(eb):
                continue
            # bounding-box reject keeps the scan cheap
            if max(p1[0], p2[0]) < min(q1[0], q2[0]) or max(q1[0], q2[0]) < min(p1[0], p2[0]):
                continue
            if max(p1[1], p2[1]) < min(q1[1], q2[1]) or max(q1[1], q2[1]) < min(p1[1], p2[1]):
                continue
            o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
            o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
            hit = (o1 != o2 and o3 != o4) or (
                (o1 == 0 and on_segment(p1, q1, p2))
                or (o2 == 0 and on_segment(p1, q2, p2))
                or (o3 == 0 and on_segment(q1, p1, q2))
                or (o4 == 0 and on_segment(q1, p2, q2))
            )
            if hit:
                crossings.append((ea, eb))
    return crossings


class Region:
    """A finite vertex set Λ together with E(Λ) and its outer boundary ∂Λ.

    ``sites`` has a fixed order (sorted coordinates) which every exact table
    and sampler uses as its column order. Heights are stored in a combined
    vector: the sites first, then the boundary vertices.
    """

    def __init__(self, lattice: PlanarLattice, sites: frozenset, root: Vertex | None = None):
        if not sites:
            raise ConfigurationError("region must contain at least one site")
        self.lattice = lattice
        self.kind = lattice.kind
        self.sites: tuple[Vertex, ...] = tuple(sorted(sites))
        site_set = set(self.sites)
        boundary = set()
        edges = []
        for x in self.sites:
            for y in lattice_neighbours(self.kind, x):
                if y not in site_set:
                    boundary.add(y)
        for v in self.sites + tuple(sorted(boundary)):
            for w in oriented_out_edges(self.kind, v):
                if v in site_set or w in site_set:
                    edges.append((v, w))
        self.boundary: tuple[Vertex, ...] = tuple(sorted(boundary))
        missing = [v for v in self.sites + self.boundary if v not in lattice]
        if missing:
            raise WindowTooSmallError(
                f"region boundary leaves the lattice window (e.g. {missing[0]}); enlarge the window"
            )
        self.edges: tuple[tuple[Vertex, Vertex], ...] = tuple(sorted(set(edges)))
        self.index: dict[Vertex, int] = {v: k for k, v in enumerate(self.sites + self.boundary)}
        if root is None:
            root = lattice.root if lattice.root in site_set else self.sites[0]
        if root not in site_set:
            raise ConfigurationError(f"root {root} is not a site of the region")
        self.root = root

    def __repr__(self):
        return f"Region({self.kind}, |Λ|={self.n_sites}, |∂Λ|={len(self.boundary)}, root={self.root})"

    def __contains__(self, v) -> bool:
        return v in self.index and self.index[v] < self.n_sites

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def max_degree(self) -> int:
        return self.lattice.max_degree

    @property
    def root_index(self) -> int:
        return self.index[self.root]

    def describe(self) -> str:
        return f"{self.kind}:{self.n_sites}sites:root={self.root[0]},{self.root[1]}"

    @cached_property
    def edge_index(self) -> np.ndarray:
        """``(|E(Λ)|, 2)`` array of (tail, head) positions in the combined vector."""
        return np.array([(self.index[x], self.index[y]) for x, y in self.edges], dtype=np.int64)

    @cached_property
    def neighbour_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-site neighbour positions and orientation signs, padded with -1.

        For a site ``x`` and neighbour ``y`` the edge term equals
        ``V(sign * (phi_x - phi_y))``: sign is +1 when the edge points
        ``y -> x`` and -1 when it points ``x -> y``.
        """
        m = self.max_degree
        nbr = -np.ones((self.n_sites, m), dtype=np.int64)
        sgn = np.zeros((self.n_sites, m), dtype=np.int64)
        fill = np.zeros(self.n_sites, dtype=np.int64)
        for e, (x, y) in enumerate(self.edges):
            ix, iy = self.index[x], self.index[y]
            if ix < self.n_sites:
                nbr[ix, fill[ix]], sgn[ix, fill[ix]] = iy, -1
                fill[ix] += 1
            if iy < self.n_sites:
                nbr[iy, fill[iy]], sgn[iy, fill[iy]] = ix, 1
                fill[iy] += 1
        return nbr, sgn

    def boundary_vector(self, psi) -> np.ndarray:
        """Boundary heights as an integer array ordered like ``self.boundary``.

        ``psi`` may be an integer (constant boundary), a mapping vertex ->
        height (missing vertices read as 0), or a callable.
        """
        if isinstance(psi, (int, np.integer)):
            return np.full(len(self.boundary), int(psi), dtype=np.int64)
        if callable(psi):
            return np.array([int(psi(v)) for v in self.boundary], dtype=np.int64)
        if isinstance(psi, Mapping):
            return np.array([int(psi.get(v, 0)) for v in self.boundary], dtype=np.int64)
        arr = np.asarray(psi, dtype=np.int64)
        if arr.shape != (len(self.boundary),):
            raise ConfigurationError(
                f"boundary vector has shape {arr.shape}, expected ({len(self.boundary)},)"
            )
        return arr


def build_lattice(kind: str, n: int, margin: int = 2) -> tuple[PlanarLattice, Region]:
    """Lattice window of radius ``n + margin`` and the ball region Λ_n."""
    _check_kind(kind)
    if n < 0:
        raise ConfigurationError("radius n must be >= 0")
    if margin < 2:
        raise ConfigurationError("window margin must be >= 2")
    lattice = PlanarLattice(kind, n + margin)
    return lattice, lattice.region(lattice.ball(n))


def box_region(kind: str, width: int, height: int, margin: int = 2) -> Region:
    """``width x height`` block of coordinates with the root at its corner (0, 0)."""
    lattice = PlanarLattice(_check_kind(kind), width + height + margin)
    return lattice.region({(i, j) for i in range(width) for j in range(height)}, root=(0, 0))


@dataclass(frozen=True)
class ContourDecomposition:
    """Split of a window into exterior, exterior contour and interior of S."""

    S: frozenset
    exterior: frozenset
    contour: frozenset
    interior: frozenset
    window: frozenset = field(repr=False)


def outer_layer(window: Region) -> frozenset:
    """Window sites with at least one lattice neighbour outside the window."""
    sites = set(window.sites)
    return frozenset(
        v for v in window.sites if any(w not in sites for w in lattice_neighbours(window.kind, v))
    )


def exterior_contour(S: Iterable[Vertex], window: Region) -> ContourDecomposition:
    """Exterior E(S), exterior contour Γ(S) and interior Δ(S) inside ``window``.

    The exterior is the union of the complement clusters that reach the outer
    layer of the window, standing in for the infinite cluster.
    """
    S = frozenset(S)
    W = frozenset(window.sites)
    if not S <= W:
        raise PreconditionError("S must be a subset of the window sites")
    layer = outer_layer(window)
    if S & layer:
        raise WindowTooSmallError("S touches the outer layer of the window; enlarge the window")

    kind = window.kind
    exterior = set(layer)
    queue = deque(layer)
    while queue:
        v = queue.popleft()
        for w in lattice_neighbours(kind, v):
            if w in W and w not in S and w not in exterior:
                exterior.add(w)
                queue.append(w)
    contour = frozenset(
        v for v in S if any(w in exterior for w in lattice_neighbours(kind, v))
    )
    interior = W - exterior - contour
    return ContourDecomposition(S, frozenset(exterior), contour, frozenset(interior), W)


def surrounds(decomp: ContourDecomposition, x: Vertex) -> bool:
    """Whether the exterior contour surrounds ``x``, i.e. ``x`` is interior."""
    if x not in decomp.window:
        raise PreconditionError(f"vertex {x} is outside the window")
    return x in decomp.interior
