"""Closed polygonal boundary curves in the plane.

A boundary mesh is an ordered list of vertices; panel ``i`` is the segment
from vertex ``i`` to vertex ``i+1`` (mod N).  Meshes are validated on
construction: at least three panels, no degenerate panels, positively
oriented (counter-clockwise), and simple (non-adjacent panels do not touch
or cross).
"""

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

_EPS = 1e-14


@dataclass(frozen=True, eq=False)
class Panel:
    """A straight boundary panel from ``a`` to ``b``."""

    a: np.ndarray
    b: np.ndarray

    @property
    def h(self):
        """Panel length."""
        return float(np.hypot(*(self.b - self.a)))

    @property
    def midpoint(self):
        return 0.5 * (self.a + self.b)

    @property
    def tangent(self):
        """Unit tangent pointing from ``a`` to ``b``."""
        return (self.b - self.a) / self.h


class BoundaryMesh:
    """Closed, simple, positively oriented polygonal curve.

    Parameters
    ----------
    vertices : array_like, shape (N, 2)
        Panel endpoints in counter-clockwise order.  The curve is closed
        implicitly (the last vertex connects back to the first).
    """

    def __init__(self, vertices):
        V = np.ascontiguousarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2:
            raise MeshError(f"vertices must have shape (N, 2), got {V.shape}")
        if len(V) < 3:
            raise MeshError(f"a closed curve needs at least 3 panels, got {len(V)}")
        if not np.all(np.isfinite(V)):
            raise MeshError("vertices contain non-finite coordinates")
        self.vertices = V
        self.vertices.flags.writeable = False
        self._validate()

    # -- derived panel arrays ------------------------------------------------

    @property
    def n_panels(self):
        return len(self.vertices)

    @property
    def a(self):
        """Panel start points, shape (N, 2)."""
        return self.vertices

    @property
    def b(self):
        """Panel end points, shape (N, 2)."""
        try:
            return self._b
        except AttributeError:
            self._b = np.roll(self.vertices, -1, axis=0)
            self._b.flags.writeable = False
            return self._b

    @property
    def lengths(self):
        try:
            return self._lengths
        except AttributeError:
            self._lengths = np.hypot(*(self.b - self.a).T)
            self._lengths.flags.writeable = False
            return self._lengths

    @property
    def midpoints(self):
        try:
            return self._midpoints
        except AttributeError:
            self._midpoints = 0.5 * (self.a + self.b)
            self._midpoints.flags.writeable = False
            return self._midpoints

    @property
    def tangents(self):
        """Unit tangents per panel, shape (N, 2)."""
        try:
            return self._tangents
        except AttributeError:
            self._tangents = (self.b - self.a) / self.lengths[:, None]
            self._tangents.flags.writeable = False
            return self._tangents

    @property
    def diameter(self):
        ptp = np.ptp(self.vertices, axis=0)
        return float(np.hypot(ptp[0], ptp[1]))

    def panel(self, i):
        return Panel(self.a[i % self.n_panels].copy(), self.b[i % self.n_panels].copy())

    def panels(self):
        return [self.panel(i) for i in range(self.n_panels)]

    @property
    def mesh_hash(self):
        """Hex digest identifying the vertex data, used to tag artifacts."""
        try:
            return self._hash
        except AttributeError:
            hsh = hashlib.sha256()
            hsh.update(struct.pack("<Q", self.n_panels))
            hsh.update(self.vertices.astype("<f8").tobytes("C"))
            self._hash = hsh.hexdigest()
            return self._hash

    def __repr__(self):
        return f"BoundaryMesh(n_panels={self.n_panels}, hash={self.mesh_hash[:12]})"

    # -- validation ----------------------------------------------------------

    def _validate(self):
        V = self.vertices
        h = self.lengths
        scale = max(self.diameter, np.max(h))
        if np.any(h <= _EPS * scale):
            bad = int(np.argmin(h))
            raise MeshError(f"panel {bad} is degenerate (length {h[bad]:g})")
        # orientation: shoelace area must be positive
        x, y = V[:, 0], V[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area <= 0.0:
            raise MeshError(
                "mesh is not positively oriented (signed area "
                f"{area:g}); reverse the vertex order"
            )
        # consecutive panels must not fold back onto each other
        t = self.tangents
        tn = np.roll(t, -1, axis=0)
        folded = (np.abs(t[:, 0] * tn[:, 1] - t[:, 1] * tn[:, 0]) <= _EPS) & (
            np.einsum("ij,ij->i", t, tn) < 0.0
        )
        if np.any(folded):
            raise MeshError(f"panels {int(np.nonzero(folded)[0][0])} and its successor fold back")
        self._check_simple(scale)

    def _check_simple(self, scale):
        """Reject meshes whose non-adjacent panels touch or cross."""
        N = self.n_panels
        I, J = np.triu_indices(N, 2)
        keep = ~((I == 0) & (J == N - 1))  # wrap-around neighbours are adjacent
        I, J = I[keep], J[keep]
        if len(I) == 0:
            return
        p1, p2 = self.a[I], self.b[I]
        q1, q2 = self.a[J], self.b[J]

        def cross(u, v):
            return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

        d1 = cross(q2 - q1, p1 - q1)
        d2 = cross(q2 - q1, p2 - q1)
        d3 = cross(p2 - p1, q1 - p1)
        d4 = cross(p2 - p1, q2 - p1)
        crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
        touching = (
            np.minimum(
                np.minimum(_point_segment_distance(p1, q1, q2), _point_segment_distance(p2, q1, q2)),
                np.minimum(_point_segment_distance(q1, p1, p2), _point_segment_distance(q2, p1, p2)),
            )
            <= _EPS * scale
        )
        bad = crossing | touching
        if np.any(bad):
            k = int(np.nonzero(bad)[0][0])
            raise MeshError(f"mesh is not simple: panels {int(I[k])} and {int(J[k])} intersect")


def _point_segment_distance(p, a, b):
    """Distance from points ``p`` to segments ``[a, b]`` (broadcasting)."""
    ab = b - a
    denom = np.einsum("...k,...k->...", ab, ab)
    t = np.clip(np.einsum("...k,...k->...", p - a, ab) / denom, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


def panel_distances(mesh, points):
    """Distances from each point to each panel, shape (npoints, N)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return _point_segment_distance(pts[:, None, :], mesh.a[None, :, :], mesh.b[None, :, :])


def distance_to_boundary(mesh, point):
    """Euclidean distance from ``point`` to the boundary curve."""
    return float(panel_distances(mesh, point).min())


def mesh_circle(n_panels, radius=1.0, center=(0.0, 0.0)):
    """Uniform N-panel polygonal approximation of a circle.

    Vertices sit on the circle; panels are the chords, so the panel length
    is ``2 R sin(pi/N)``.
    """
    if n_panels < 3:
        raise MeshError(f"n_panels must be >= 3, got {n_panels}")
    if radius <= 0:
        raise MeshError(f"radius must be positive, got {radius}")
    theta = 2.0 * np.pi * np.arange(n_panels) / n_panels
    V = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center, float)
    return BoundaryMesh(V)


def mesh_polygon(corners, n_panels=None):
    """Mesh a simple polygon with panels of comparable length.

    Parameters
    ----------
    corners : array_like, shape (E, 2)
        Polygon corners, either orientation (clockwise input is reversed).
    n_panels : int, optional
        Total panel count, distributed over edges proportionally to edge
        length (largest-remainder rounding, at least one panel per edge).
        Defaults to one panel per edge.
    """
    C = np.asarray(corners, dtype=float)
    if C.ndim != 2 or C.shape[1] != 2 or len(C) < 3:
        raise MeshError(f"corners must have shape (E >= 3, 2), got {C.shape}")
    x, y = C[:, 0], C[:, 1]
    if 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0.0:
        # reverse orientation but keep the starting corner, so clockwise
        # input produces the identical mesh to its counter-clockwise twin
        C = np.roll(C[::-1], 1, axis=0)
    E = len(C)
    if n_panels is None:
        n_panels = E
    if n_panels < E:
        raise MeshError(f"n_panels must be >= number of edges ({E}), got {n_panels}")
    L = np.linalg.norm(np.roll(C, -1, axis=0) - C, axis=1)
    if np.any(L <= 0):
        raise MeshError("polygon has repeated consecutive corners")
    quota = n_panels * L / L.sum()
    counts = np.maximum(1, np.floor(quota).astype(int))
    rem = quota - counts
    while counts.sum() < n_panels:
        i = int(np.argmax(rem))
        counts[i] += 1
        rem[i] -= 1.0
    while counts.sum() > n_panels:
        eligible = counts > 1
        i = int(np.argmin(np.where(eligible, rem, np.inf)))
        counts[i] -= 1
        rem[i] += 1.0
    V = []
    for i in range(E):
        A, B = C[i], C[(i + 1) % E]
        for k in range(counts[i]):
            V.append(A + (B - A) * (k / counts[i]))
    return BoundaryMesh(np.array(V))


def refine(mesh):
    """Dyadic refinement: insert the midpoint of every panel."""
    V = np.empty((2 * mesh.n_panels, 2))
    V[0::2] = mesh.a
    V[1::2] = mesh.midpoints
    return BoundaryMesh(V)


def write_mesh(path, mesh, comment=None):
    """Write a mesh as plain text, one ``x1 x2`` vertex per line."""
    with open(path, "w") as f:
        if comment:
            for line in str(comment).splitlines():
                f.write(f"# {line}\n")
        for vx, vy in mesh.vertices:
            f.write(f"{vx:.17g} {vy:.17g}\n")


def read_mesh(path):
    """Read a mesh written by :func:`write_mesh`.  '#' starts a comment."""
    verts = []
    with open(path) as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MeshError(f"{path}:{ln}: expected 'x1 x2', got {raw.rstrip()!r}")
            try:
                verts.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise MeshError(f"{path}:{ln}: {exc}") from exc
    return BoundaryMesh(np.array(verts, dtype=float))
