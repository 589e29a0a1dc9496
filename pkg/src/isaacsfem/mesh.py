"""Triangular meshes with interior-first node ordering and acuteness checks.

Nodes are stored with all interior nodes first (indices 0..n_interior-1) and
boundary nodes after them, so operator assembly can address the interior block
contiguously.  P1 hat function data (element areas, per-element constant hat
gradients, L1 norms of the hats) is precomputed once and kept immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import MeshFormatError, ParameterError

__all__ = [
    "Mesh",
    "AcutenessReport",
    "generate_triangle_mesh",
    "generate_annulus_mesh",
    "load_mesh",
    "dump_mesh",
    "check_strict_acuteness",
]

# Equilateral reference triangle: side sqrt(3), centered at the origin,
# inscribed in the unit circle.  Red refinement halves the side per level.
_TRIANGLE_CORNERS = np.array(
    [
        [-math.sqrt(3.0) / 2.0, 0.5],
        [math.sqrt(3.0) / 2.0, 0.5],
        [0.0, -1.0],
    ]
)


@dataclass(frozen=True)
class Mesh:
    """Immutable 2D triangular mesh.

    Attributes
    ----------
    vertices : (nv, 2) float array, interior nodes first.
    triangles : (nt, 3) int array of vertex indices, counterclockwise.
    boundary_flags : (nv,) bool array; True marks boundary nodes.
    n_interior : number of interior nodes.
    element_areas : (nt,) areas vol(K) > 0.
    hat_gradients : (nt, 3, 2) constant gradient of each local hat on K.
    l1_norms : (nv,) L1 norms of the hat functions (sum of areas / 3).
    external_ids : (nv,) original (input-order) index of each node.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray
    n_interior: int
    element_areas: np.ndarray
    hat_gradients: np.ndarray
    l1_norms: np.ndarray
    external_ids: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def dx(self) -> float:
        """Mesh size: the longest edge over all elements."""
        p = self.vertices[self.triangles]
        edges = p[:, [1, 2, 0], :] - p[:, [0, 1, 2], :]
        return float(np.sqrt((edges**2).sum(axis=2)).max())

    @cached_property
    def centroids(self) -> np.ndarray:
        """(nt, 2) element centroids."""
        return self.vertices[self.triangles].mean(axis=1)

    def edge_midpoints(self) -> np.ndarray:
        """(nt, 3, 2) midpoints of the three edges of each element."""
        p = self.vertices[self.triangles]
        return 0.5 * (p[:, [0, 1, 2], :] + p[:, [1, 2, 0], :])


@dataclass(frozen=True)
class AcutenessReport:
    """Result of the strict-acuteness check.

    theta is the largest angle (radians) such that for every element and every
    distinct pair of local hats, grad(phi_a) . grad(phi_b) <=
    -sin(theta) |grad(phi_a)| |grad(phi_b)|.  theta > 0 means strictly acute;
    a right-angled pair gives theta = 0, an obtuse pair theta < 0.
    """

    theta: float
    worst_pair: tuple[int, tuple[int, int]]
    is_strictly_acute: bool

    def summary(self) -> str:
        element, (a, b) = self.worst_pair
        verdict = "strictly acute" if self.is_strictly_acute else "NOT strictly acute"
        return (
            f"theta = {math.degrees(self.theta):.2f} deg ({verdict}); "
            f"worst pair: element {element}, local vertices ({a}, {b})"
        )


def _build_mesh(
    vertices: np.ndarray,
    triangles: np.ndarray,
    boundary_flags: np.ndarray,
    vertex_lines: np.ndarray | None = None,
    triangle_lines: np.ndarray | None = None,
) -> Mesh:
    """Validate, orient, reorder interior-first, and precompute hat data.

    vertex_lines / triangle_lines optionally carry source line numbers so
    parse errors can name them.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    boundary_flags = np.ascontiguousarray(boundary_flags, dtype=bool)
    nv = vertices.shape[0]
    nt = triangles.shape[0]

    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= nv:
        bad = np.argwhere((triangles < 0) | (triangles >= nv))[0][0]
        line = None if triangle_lines is None else int(triangle_lines[bad])
        raise MeshFormatError("vertex index out of range", line)

    used = np.zeros(nv, dtype=bool)
    used[triangles] = True
    if not used.all():
        dangler = int(np.flatnonzero(~used)[0])
        line = None if vertex_lines is None else int(vertex_lines[dangler])
        raise MeshFormatError(f"vertex {dangler} belongs to no triangle", line)

    # Orient counterclockwise; reject degenerate elements.
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    flip = signed < 0
    if flip.any():
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        signed = np.abs(signed)
    degenerate = signed <= 0.0
    if degenerate.any():
        bad = int(np.flatnonzero(degenerate)[0])
        line = None if triangle_lines is None else int(triangle_lines[bad])
        raise MeshFormatError(f"element {bad} has nonpositive area", line)

    # Interior-first permutation (stable, so already-ordered meshes pass through).
    order = np.argsort(boundary_flags, kind="stable")
    rank = np.empty(nv, dtype=np.int64)
    rank[order] = np.arange(nv)
    vertices = vertices[order]
    boundary_flags = boundary_flags[order]
    triangles = rank[triangles]
    external_ids = order

    n_interior = int((~boundary_flags).sum())
    areas = signed  # positive after orientation

    # Hat gradients: grad(phi_a) = perp(edge opposite a) / (2 area),
    # perp((dx, dy)) = (-dy, dx).
    p = vertices[triangles]
    opposite = p[:, [2, 0, 1], :] - p[:, [1, 2, 0], :]
    grads = np.empty((nt, 3, 2))
    grads[:, :, 0] = -opposite[:, :, 1]
    grads[:, :, 1] = opposite[:, :, 0]
    grads /= (2.0 * areas)[:, None, None]

    l1 = np.zeros(nv)
    np.add.at(l1, triangles, (areas / 3.0)[:, None])

    for arr in (vertices, triangles, boundary_flags, areas, grads, l1, external_ids):
        arr.flags.writeable = False
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_flags=boundary_flags,
        n_interior=n_interior,
        element_areas=areas,
        hat_gradients=grads,
        l1_norms=l1,
        external_ids=external_ids,
    )


def _topological_boundary_flags(nv: int, triangles: np.ndarray) -> np.ndarray:
    """Flag endpoints of edges that belong to exactly one triangle."""
    edges = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    edges = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(
        edges, axis=0, return_inverse=True, return_counts=True
    )
    boundary_edges = edges[counts[inverse] == 1]
    flags = np.zeros(nv, dtype=bool)
    flags[boundary_edges] = True
    return flags


def generate_triangle_mesh(level: int) -> Mesh:
    """Uniform red refinement of the equilateral reference triangle.

    Each refinement splits every triangle into four congruent children, so all
    elements stay equilateral and the mesh size is sqrt(3) * 2**(-level).
    """
    if level < 0:
        raise ParameterError("refinement level must be >= 0")
    vertices = [tuple(v) for v in _TRIANGLE_CORNERS]
    triangles = [(0, 1, 2)]
    for _ in range(level):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = midpoint.get(key)
            if idx is None:
                pa, pb = vertices[a], vertices[b]
                vertices.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
                idx = len(vertices) - 1
                midpoint[key] = idx
            return idx

        refined = []
        for a, b, c in triangles:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            refined += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        triangles = refined

    tri = np.array(triangles, dtype=np.int64)
    verts = np.array(vertices)
    return _build_mesh(verts, tri, _topological_boundary_flags(len(verts), tri))


def generate_annulus_mesh(r: float, R: float, n_radial: int, n_angular: int) -> Mesh:
    """Structured mesh of the annulus r <= |x| <= R.

    Rings are spaced geometrically and alternate rings are rotated by half an
    angular step, so each band is triangulated antiprism-style with
    near-equilateral triangles (plain diagonal splitting of polar quads always
    leaves obtuse corners at the inner ring and can never be strictly acute).
    """
    if not (0.0 < r < R):
        raise ParameterError(f"annulus radii must satisfy 0 < r < R, got r={r}, R={R}")
    if n_radial < 2:
        raise ParameterError("n_radial must be >= 2")
    if n_angular < 8:
        raise ParameterError("n_angular must be >= 8")

    step = 2.0 * math.pi / n_angular
    rings = r * (R / r) ** (np.arange(n_radial + 1) / n_radial)
    verts = np.empty(((n_radial + 1) * n_angular, 2))
    for j, radius in enumerate(rings):
        angles = (np.arange(n_angular) + 0.5 * (j % 2)) * step
        verts[j * n_angular : (j + 1) * n_angular, 0] = radius * np.cos(angles)
        verts[j * n_angular : (j + 1) * n_angular, 1] = radius * np.sin(angles)

    tris = []
    for j in range(n_radial):
        inner = j * n_angular + np.arange(n_angular)
        outer = inner + n_angular
        inner_next = j * n_angular + (np.arange(n_angular) + 1) % n_angular
        outer_next = inner_next + n_angular
        if j % 2 == 0:
            # outer ring rotated +half step: outer[m] sits between inner[m], inner[m+1]
            tris.append(np.stack([inner, inner_next, outer], axis=1))
            tris.append(np.stack([inner_next, outer_next, outer], axis=1))
        else:
            # inner ring rotated +half step: inner[m] sits between outer[m], outer[m+1]
            tris.append(np.stack([inner, inner_next, outer_next], axis=1))
            tris.append(np.stack([inner, outer_next, outer], axis=1))
    triangles = np.concatenate(tris).astype(np.int64)

    flags = np.zeros(len(verts), dtype=bool)
    flags[:n_angular] = True
    flags[-n_angular:] = True
    return _build_mesh(verts, triangles, flags)


def load_mesh(text: str) -> Mesh:
    """Parse the ASCII mesh format.

    Line 1: `nv nt`; then nv lines `x y boundary_flag(0|1)`; then nt lines
    `i j k` (0-based vertex indices).  `#` starts a comment.  Nodes are
    reordered interior-first; Mesh.external_ids records the permutation.
    """
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            rows.append((lineno, stripped.split()))

    if not rows:
        raise MeshFormatError("empty mesh file")
    lineno, header = rows[0]
    if len(header) != 2:
        raise MeshFormatError("expected header `nv nt`", lineno)
    try:
        nv, nt = int(header[0]), int(header[1])
    except ValueError:
        raise MeshFormatError("expected integer counts in header", lineno) from None
    if nv < 3 or nt < 1:
        raise MeshFormatError("mesh needs at least 3 vertices and 1 triangle", lineno)
    if len(rows) != 1 + nv + nt:
        raise MeshFormatError(
            f"expected {1 + nv + nt} data lines, found {len(rows)}", rows[-1][0]
        )

    vertices = np.empty((nv, 2))
    flags = np.empty(nv, dtype=bool)
    vertex_lines = np.empty(nv, dtype=np.int64)
    for i, (lineno, tokens) in enumerate(rows[1 : 1 + nv]):
        if len(tokens) != 3:
            raise MeshFormatError("expected `x y boundary_flag`", lineno)
        try:
            vertices[i] = (float(tokens[0]), float(tokens[1]))
            flag = int(tokens[2])
        except ValueError:
            raise MeshFormatError("malformed vertex line", lineno) from None
        if flag not in (0, 1):
            raise MeshFormatError("boundary flag must be 0 or 1", lineno)
        flags[i] = bool(flag)
        vertex_lines[i] = lineno

    triangles = np.empty((nt, 3), dtype=np.int64)
    triangle_lines = np.empty(nt, dtype=np.int64)
    for i, (lineno, tokens) in enumerate(rows[1 + nv :]):
        if len(tokens) != 3:
            raise MeshFormatError("expected `i j k`", lineno)
        try:
            triangles[i] = [int(t) for t in tokens]
        except ValueError:
            raise MeshFormatError("malformed triangle line", lineno) from None
        triangle_lines[i] = lineno

    return _build_mesh(vertices, triangles, flags, vertex_lines, triangle_lines)


def dump_mesh(mesh: Mesh) -> str:
    """Serialize to the ASCII mesh format (internal node order)."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    for (x, y), flag in zip(mesh.vertices, mesh.boundary_flags):
        lines.append(f"{x:.17g} {y:.17g} {int(flag)}")
    for a, b, c in mesh.triangles:
        lines.append(f"{a} {b} {c}")
    return "\n".join(lines) + "\n"


def check_strict_acuteness(mesh: Mesh) -> AcutenessReport:
    """Largest theta with grad(phi_a).grad(phi_b) <= -sin(theta)|.||.| pairwise.

    All distinct local pairs of every element are checked (a conservative
    superset of the interior-interior pairs the scheme needs).
    """
    grads = mesh.hat_gradients
    norms = np.sqrt((grads**2).sum(axis=2))
    pairs = [(0, 1), (0, 2), (1, 2)]
    sines = np.empty((mesh.n_triangles, len(pairs)))
    for col, (a, b) in enumerate(pairs):
        dot = (grads[:, a, :] * grads[:, b, :]).sum(axis=1)
        sines[:, col] = -dot / (norms[:, a] * norms[:, b])
    flat = int(np.argmin(sines))
    element, col = divmod(flat, len(pairs))
    worst = float(sines[element, col])
    theta = math.asin(min(max(worst, -1.0), 1.0))
    return AcutenessReport(
        theta=theta,
        worst_pair=(element, pairs[col]),
        is_strictly_acute=theta > 0.0,
    )
