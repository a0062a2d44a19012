"""Galerkin assembly of the single layer trace operator.

The bilinear form on piecewise-constant densities is

    A[i, j] = int_{panel_i} int_{panel_j} c(2, 2s) |P - Q|^(2s - 2) dQ dP.

The kernel exponent ``2s - 2`` lies in (-1, 0) for ``1/2 < s < 1``, so every
panel pair is integrable.  Pairs are routed by geometry:

* identical panels: closed form ``c 2 h^(2s) / ((2s-1) 2s)``;
* collinear panels (any overlap, gap, or shared endpoint): closed form from
  the explicit antiderivative of ``|t - tau|^p``;
* panels sharing one endpoint: tensor Gauss rule geometrically graded
  (ratio 1/2) toward the shared vertex; the innermost cell pair, which
  contains the singular corner, is integrated exactly in the radial
  direction using the homogeneity of the kernel;
* well separated panels (gap > ``near_field_ratio * max(h_i, h_j)``): plain
  tensor Gauss;
* remaining close pairs: tensor Gauss on uniformly split subpanels, split
  until the subpanel size satisfies the separation ratio.

The same machinery, parameterized by the kernel power, also integrates the
more singular Slobodeckij kernel (see :mod:`fraclap.solve`) and rectangular
cross-mesh interactions used by the refinement-based trace error.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import FraclapError, MeshError
from .geometry import BoundaryMesh, Panel, panel_distances, _point_segment_distance
from .kernel import FracParams
from .quadrature import QuadratureConfig, gauss_rule, graded_rule

_COLLINEAR_TOL = 1e-12
_MATCH_TOL = 1e-14
_FAR_CHUNK = 16384

# ---------------------------------------------------------------------------
# single-pair building blocks, kernel |P - Q|^p without the Riesz constant
# ---------------------------------------------------------------------------


def _self_entry(h, p):
    """Exact coincident-panel integral int_0^h int_0^h |t - tau|^p."""
    return 2.0 * h ** (p + 2.0) / ((p + 1.0) * (p + 2.0))


def _collinear_entry(lo_j, hi_j, h_i, p):
    """Exact integral for collinear panels.

    Panel i spans [0, h_i] in arclength coordinates along the common line and
    panel j spans [lo_j, hi_j] in the same coordinates.  Valid for any
    configuration (overlap, containment, touching, gap) when p > -1.
    """

    def G(z):
        return np.abs(z) ** (p + 2.0) / ((p + 1.0) * (p + 2.0))

    return G(h_i - lo_j) - G(h_i - hi_j) - G(-lo_j) + G(-hi_j)


def _adjacent_entry(e_i, e_j, h_i, h_j, p, order, levels):
    """Graded tensor quadrature for panels meeting at one shared vertex.

    ``e_i``/``e_j`` are unit tangents pointing from the shared vertex into
    each panel, so the integrand is |t e_i - tau e_j|^p on (0,h_i)x(0,h_j).
    The closing cell [0, eps_i] x [0, eps_j] is integrated with the exact
    radial reduction (the kernel is homogeneous there), which removes the
    accuracy floor a purely graded rule would have.
    """
    dot = float(e_i @ e_j)
    if dot >= 1.0 - 1e-12:
        raise MeshError("adjacent panels overlap (zero angle at the shared vertex)")
    gx, gw = gauss_rule(order)
    tb, wb = graded_rule(levels, order)
    t = tb * h_i
    tau = tb * h_j
    wt = wb * h_i
    wtau = wb * h_j
    d2 = t[:, None] ** 2 - 2.0 * dot * np.outer(t, tau) + tau[None, :] ** 2
    val = wt @ d2 ** (p / 2.0) @ wtau
    # swap the plain-Gauss estimate on the singular closing cell for the
    # exact-in-radius value
    inner = slice(len(tb) - order, len(tb))
    val -= wt[inner] @ d2[inner, inner] ** (p / 2.0) @ wtau[inner]
    eps_i = h_i * 0.5 ** levels
    eps_j = h_j * 0.5 ** levels
    if p + 2.0 <= 0.0:
        return np.inf
    for u, v in ((eps_i, eps_j), (eps_j, eps_i)):
        c = v / u
        psi = (1.0 - 2.0 * dot * c * gx + (c * gx) ** 2) ** (p / 2.0)
        val += c * u ** (p + 2.0) / (p + 2.0) * float(gw @ psi)
    return float(val)


def _near_entry(a_i, b_i, h_i, a_j, b_j, h_j, dist, p, order, ratio, max_split=12):
    """Composite tensor Gauss on uniformly split subpanels of a close pair."""
    gx, gw = gauss_rule(order)
    m_i = min(max_split, max(0, int(np.ceil(np.log2(ratio * h_i / dist)))))
    m_j = min(max_split, max(0, int(np.ceil(np.log2(ratio * h_j / dist)))))
    t_i = ((np.arange(2 ** m_i)[:, None] + gx[None, :]) / 2 ** m_i).ravel()
    t_j = ((np.arange(2 ** m_j)[:, None] + gx[None, :]) / 2 ** m_j).ravel()
    P = a_i[None, :] + t_i[:, None] * (b_i - a_i)[None, :]
    Q = a_j[None, :] + t_j[:, None] * (b_j - a_j)[None, :]
    w_i = np.tile(gw, 2 ** m_i) * (h_i / 2 ** m_i)
    w_j = np.tile(gw, 2 ** m_j) * (h_j / 2 ** m_j)
    D = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=-1)
    return float(w_i @ D ** p @ w_j)


def _segment_gap(a_i, b_i, a_j, b_j):
    """Distance between two segments; 0 if they properly cross."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    if (orient(a_i, b_i, a_j) * orient(a_i, b_i, b_j) < 0.0
            and orient(a_j, b_j, a_i) * orient(a_j, b_j, b_i) < 0.0):
        return 0.0
    return min(
        float(_point_segment_distance(a_i, a_j, b_j)),
        float(_point_segment_distance(b_i, a_j, b_j)),
        float(_point_segment_distance(a_j, a_i, b_i)),
        float(_point_segment_distance(b_j, a_i, b_i)),
    )


# ---------------------------------------------------------------------------
# generic pair-interaction matrix
# ---------------------------------------------------------------------------


def _classify_shared_vertex(a_i, b_i, a_j, b_j, scale):
    """Return (e_i, e_j) unit tangents out of the shared vertex, or None."""
    for P, sign_i in ((a_i, 1.0), (b_i, -1.0)):
        for Q, sign_j in ((a_j, 1.0), (b_j, -1.0)):
            if abs(P[0] - Q[0]) <= _MATCH_TOL * scale and abs(P[1] - Q[1]) <= _MATCH_TOL * scale:
                e_i = sign_i * (b_i - a_i)
                e_j = sign_j * (b_j - a_j)
                return e_i / np.linalg.norm(e_i), e_j / np.linalg.norm(e_j)
    return None


def interaction_matrix(mesh_rows, mesh_cols, power, quad=QuadratureConfig(), diagonal=True):
    """Matrix of ``int int |P - Q|^power`` over all panel pairs.

    ``mesh_rows`` and ``mesh_cols`` may be the same mesh (the result is then
    exactly symmetric) or different meshes, e.g. a mesh and its refinement.
    For ``power <= -1`` coincident or overlapping pairs diverge; the diagonal
    of the same-mesh case can be skipped with ``diagonal=False`` and any
    other overlap raises.  Entries of touching pairs that diverge are
    returned as ``inf``.
    """
    p = float(power)
    if not p > -2.0:
        raise ValueError(f"kernel power must exceed -2 for integrable pairs, got {p}")
    g, L, ratio = quad.gauss_order, quad.graded_levels, quad.near_field_ratio
    same = mesh_rows is mesh_cols
    ar, br, hr, tr = mesh_rows.a, mesh_rows.b, mesh_rows.lengths, mesh_rows.tangents
    ac, bc, hc, tc = mesh_cols.a, mesh_cols.b, mesh_cols.lengths, mesh_cols.tangents
    Nr, Nc = mesh_rows.n_panels, mesh_cols.n_panels
    scale = max(mesh_rows.diameter, mesh_cols.diameter)

    if same:
        I, J = np.triu_indices(Nr, 1)
    else:
        I, J = np.meshgrid(np.arange(Nr), np.arange(Nc), indexing="ij")
        I, J = I.ravel(), J.ravel()

    # identical pairs (cross-mesh duplicates; the same-mesh diagonal is
    # handled after the loop)
    ident = (
        (np.abs(ar[I] - ac[J]).max(axis=1) <= _MATCH_TOL * scale)
        & (np.abs(br[I] - bc[J]).max(axis=1) <= _MATCH_TOL * scale)
    )
    # collinear pairs: parallel tangents and zero offset of the j start
    cross_t = tr[I, 0] * tc[J, 1] - tr[I, 1] * tc[J, 0]
    dv = ac[J] - ar[I]
    cross_d = tr[I, 0] * dv[:, 1] - tr[I, 1] * dv[:, 0]
    collinear = (
        (np.abs(cross_t) <= _COLLINEAR_TOL)
        & (np.abs(cross_d) <= _COLLINEAR_TOL * scale)
        & ~ident
    )
    if p <= -1.0:
        # the antiderivative formula changes branch at p = -1, -2; for the
        # Slobodeckij kernel route collinear disjoint pairs numerically
        collinear &= False
    # shared endpoint (exactly one, since collinear containment is caught above)
    shr = (
        (np.abs(ar[I] - ac[J]).max(axis=1) <= _MATCH_TOL * scale)
        | (np.abs(ar[I] - bc[J]).max(axis=1) <= _MATCH_TOL * scale)
        | (np.abs(br[I] - ac[J]).max(axis=1) <= _MATCH_TOL * scale)
        | (np.abs(br[I] - bc[J]).max(axis=1) <= _MATCH_TOL * scale)
    ) & ~ident & ~collinear
    # remaining pairs routed by gap size
    d4 = np.minimum(
        np.minimum(
            _point_segment_distance(ar[I], ac[J], bc[J]),
            _point_segment_distance(br[I], ac[J], bc[J]),
        ),
        np.minimum(
            _point_segment_distance(ac[J], ar[I], br[I]),
            _point_segment_distance(bc[J], ar[I], br[I]),
        ),
    )

    # proper crossings have positive endpoint distances but zero gap
    def _orient(p, q, r):
        return (q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0])

    crossing = (
        (_orient(ar[I], br[I], ac[J]) * _orient(ar[I], br[I], bc[J]) < 0.0)
        & (_orient(ac[J], bc[J], ar[I]) * _orient(ac[J], bc[J], br[I]) < 0.0)
    )
    d4 = np.where(crossing, 0.0, d4)
    rest = ~ident & ~collinear & ~shr
    far = rest & (d4 > ratio * np.maximum(hr[I], hc[J]))
    near = rest & ~far

    out = np.zeros((Nr, Nc))

    # far field: plain tensor Gauss, vectorized in chunks
    gx, gw = gauss_rule(g)
    Xr = ar[:, None, :] + gx[None, :, None] * (br - ar)[:, None, :]
    Wr = gw[None, :] * hr[:, None]
    if same:
        Xc, Wc = Xr, Wr
    else:
        Xc = ac[:, None, :] + gx[None, :, None] * (bc - ac)[:, None, :]
        Wc = gw[None, :] * hc[:, None]
    fi, fj = I[far], J[far]
    vals = np.empty(len(fi))
    for k0 in range(0, len(fi), _FAR_CHUNK):
        sl = slice(k0, k0 + _FAR_CHUNK)
        diff = Xr[fi[sl]][:, :, None, :] - Xc[fj[sl]][:, None, :, :]
        D = np.sqrt(np.einsum("pabk,pabk->pab", diff, diff))
        vals[sl] = np.einsum("pa,pab,pb->p", Wr[fi[sl]], D ** p, Wc[fj[sl]])
    out[fi, fj] = vals

    # collinear pairs: exact
    ci, cj = I[collinear], J[collinear]
    if len(ci):
        t0 = np.einsum("ik,ik->i", ac[cj] - ar[ci], tr[ci])
        t1 = t0 + hc[cj] * np.einsum("ik,ik->i", tc[cj], tr[ci])
        out[ci, cj] = _collinear_entry(np.minimum(t0, t1), np.maximum(t0, t1), hr[ci], p)

    # identical pairs (cross-mesh): exact self formula
    ii, ij = I[ident], J[ident]
    if len(ii):
        if p <= -1.0:
            raise FraclapError("coincident panels diverge for this kernel power")
        out[ii, ij] = _self_entry(hr[ii], p)

    # shared-vertex pairs
    for i, j in zip(I[shr], J[shr]):
        pair = _classify_shared_vertex(ar[i], br[i], ac[j], bc[j], scale)
        out[i, j] = _adjacent_entry(pair[0], pair[1], hr[i], hc[j], p, g, L)

    # near field
    for i, j, dist in zip(I[near], J[near], d4[near]):
        if dist <= 0.0:
            raise MeshError(f"panels {i} and {j} touch but share no endpoint")
        out[i, j] = _near_entry(ar[i], br[i], hr[i], ac[j], bc[j], hc[j], dist, p, g, ratio)

    if same:
        out += out.T
        if diagonal:
            if p <= -1.0:
                raise FraclapError("coincident panels diverge for this kernel power")
            out[np.arange(Nr), np.arange(Nr)] = _self_entry(hr, p)
    return out


# ---------------------------------------------------------------------------
# public assembly API
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GalerkinMatrix:
    """Dense Galerkin matrix tagged with its provenance."""

    entries: np.ndarray
    mesh_hash: str
    params: FracParams
    quad: QuadratureConfig

    def __post_init__(self):
        E = self.entries
        if E.ndim != 2 or E.shape[0] != E.shape[1]:
            raise ValueError(f"entries must be square, got shape {E.shape}")
        if not np.all(np.isfinite(E)):
            raise ValueError("matrix entries contain non-finite values")
        if np.any(np.diag(E) <= 0.0):
            raise ValueError("matrix has a non-positive diagonal entry")
        self.entries.flags.writeable = False

    @property
    def n_panels(self):
        return self.entries.shape[0]


def panel_pair_integral(panel_i, panel_j, params, quad=QuadratureConfig()):
    """Galerkin entry for a single pair of panels (includes the Riesz constant).

    Routing follows the same rules as :func:`assemble`.  Panels that cross
    each other (rather than sharing an endpoint or being collinear) are
    rejected.
    """
    if not isinstance(panel_i, Panel) or not isinstance(panel_j, Panel):
        raise TypeError("panel_pair_integral expects Panel arguments")
    p = params.kernel_power
    c = params.constant
    g, L, ratio = quad.gauss_order, quad.graded_levels, quad.near_field_ratio
    a_i, b_i, h_i = panel_i.a, panel_i.b, panel_i.h
    a_j, b_j, h_j = panel_j.a, panel_j.b, panel_j.h
    scale = max(h_i, h_j, float(np.abs(np.concatenate([a_i, b_i, a_j, b_j])).max()))
    t_i, t_j = panel_i.tangent, panel_j.tangent

    same = np.abs(a_i - a_j).max() <= _MATCH_TOL * scale and np.abs(b_i - b_j).max() <= _MATCH_TOL * scale
    if same:
        return c * _self_entry(h_i, p)
    cross_t = t_i[0] * t_j[1] - t_i[1] * t_j[0]
    dv = a_j - a_i
    cross_d = t_i[0] * dv[1] - t_i[1] * dv[0]
    if abs(cross_t) <= _COLLINEAR_TOL and abs(cross_d) <= _COLLINEAR_TOL * scale:
        t0 = float((a_j - a_i) @ t_i)
        t1 = t0 + h_j * float(t_j @ t_i)
        return c * float(_collinear_entry(min(t0, t1), max(t0, t1), h_i, p))
    pair = _classify_shared_vertex(a_i, b_i, a_j, b_j, scale)
    if pair is not None:
        return c * _adjacent_entry(pair[0], pair[1], h_i, h_j, p, g, L)
    dist = _segment_gap(a_i, b_i, a_j, b_j)
    if dist <= _MATCH_TOL * scale:
        raise MeshError("panels cross or touch without sharing an endpoint")
    gx, gw = gauss_rule(g)
    if dist > ratio * max(h_i, h_j):
        P = a_i[None, :] + gx[:, None] * (b_i - a_i)[None, :]
        Q = a_j[None, :] + gx[:, None] * (b_j - a_j)[None, :]
        D = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=-1)
        return c * float((gw * h_i) @ D ** p @ (gw * h_j))
    return c * _near_entry(a_i, b_i, h_i, a_j, b_j, h_j, dist, p, g, ratio)


def assemble(mesh, params, quad=QuadratureConfig()):
    """Assemble the dense Galerkin matrix of the single layer trace operator.

    The result is exactly symmetric (the upper triangle is mirrored) and
    deterministic: entries do not depend on thread counts or scheduling.
    """
    if not isinstance(mesh, BoundaryMesh):
        raise TypeError("assemble expects a BoundaryMesh")
    with threadpool_limits(limits=1):
        entries = params.constant * interaction_matrix(mesh, mesh, params.kernel_power, quad)
    return GalerkinMatrix(entries=entries, mesh_hash=mesh.mesh_hash, params=params, quad=quad)


def assemble_cross(mesh_rows, mesh_cols, params, quad=QuadratureConfig()):
    """Rectangular Galerkin interactions between two meshes.

    Used to test a density from a coarse solve against a refined mesh, e.g.
    for the refinement-based trace error.  ``mesh_rows`` panels index rows.
    """
    with threadpool_limits(limits=1):
        return params.constant * interaction_matrix(mesh_rows, mesh_cols, params.kernel_power, quad)


# ---------------------------------------------------------------------------
# point evaluation of the single layer potential
# ---------------------------------------------------------------------------


def eval_potential(coeffs, mesh, params, points, quad=QuadratureConfig()):
    """Evaluate ``u(x) = sum_j phi_j int_{panel_j} Gamma_2s(x - Q) dQ``.

    ``points`` may be a single point or an array of shape (m, 2).  All
    points must lie strictly off the boundary curve.  Panels well separated
    from a point use a plain Gauss rule; close panels are integrated on a
    composite grid geometrically graded toward the point's projection onto
    the panel, which keeps the rule accurate arbitrarily close to the curve.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (mesh.n_panels,):
        raise ValueError(f"expected {mesh.n_panels} coefficients, got shape {coeffs.shape}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (m, 2), got {np.shape(points)}")
    values = np.empty(len(pts))
    chunk = max(1, _FAR_CHUNK // max(mesh.n_panels, 1) * 8)
    for k0 in range(0, len(pts), chunk):
        sl = slice(k0, min(k0 + chunk, len(pts)))
        values[sl] = _eval_chunk(coeffs, mesh, params, pts[sl], quad)
    return values if np.ndim(points) > 1 else float(values[0])


def _eval_chunk(coeffs, mesh, params, pts, quad):
    p = params.kernel_power
    c = params.constant
    g, ratio = quad.gauss_order, quad.near_field_ratio
    a, b, h, tg = mesh.a, mesh.b, mesh.lengths, mesh.tangents
    on_tol = 1e-12 * mesh.diameter

    ab = b - a
    diff = pts[:, None, :] - a[None, :, :]
    tpar = np.clip(
        np.einsum("pjk,jk->pj", diff, ab) / np.einsum("jk,jk->j", ab, ab), 0.0, 1.0
    )
    proj = a[None, :, :] + tpar[..., None] * ab[None, :, :]
    dmat = np.linalg.norm(pts[:, None, :] - proj, axis=-1)
    if np.any(dmat.min(axis=1) <= on_tol):
        bad = int(np.argmax(dmat.min(axis=1) <= on_tol))
        raise ValueError(f"point {pts[bad]} lies on the boundary")

    gx, gw = gauss_rule(g)
    X = a[:, None, :] + gx[None, :, None] * ab[:, None, :]
    W = gw[None, :] * h[:, None]
    far = dmat > ratio * h[None, :]
    D = np.linalg.norm(pts[:, None, None, :] - X[None, :, :, :], axis=-1)
    contrib = np.einsum("pjg,jg->pj", D ** p, W)
    values = np.where(far, contrib, 0.0) @ coeffs

    for ip, j in zip(*np.nonzero(~far)):
        x = pts[ip]
        dist = dmat[ip, j]
        t_star = tpar[ip, j] * h[j]
        levels = min(40, max(1, int(np.ceil(np.log2(h[j] / dist))) + 2))
        acc = 0.0
        for lo_end, hi_end in ((0.0, t_star), (t_star, h[j])):
            span = hi_end - lo_end
            if span <= 0.0:
                continue
            cuts = 0.5 ** np.arange(levels + 1)
            if lo_end == t_star:  # grade toward the lower endpoint
                edges = np.concatenate([[lo_end], lo_end + span * cuts[::-1]])
            else:  # grade toward the upper endpoint
                edges = np.concatenate([hi_end - span * cuts, [hi_end]])
            for lo2, hi2 in zip(edges[:-1], edges[1:]):
                tv = lo2 + (hi2 - lo2) * gx
                Q = a[j][None, :] + tv[:, None] * tg[j][None, :]
                acc += (hi2 - lo2) * float(gw @ np.linalg.norm(x[None, :] - Q, axis=-1) ** p)
        values[ip] += acc * coeffs[j]

    return c * values


def potential_evaluator(coeffs, mesh, params, quad=QuadratureConfig()):
    """Return ``u(points)`` as a closure over a fixed density."""
    coeffs = np.array(coeffs, dtype=float, copy=True)

    def u(points):
        return eval_potential(coeffs, mesh, params, points, quad)

    return u


# ---------------------------------------------------------------------------
# matrix file format: 16-byte header (magic 'FLBM', u32 N, u32 reserved,
# 4 pad bytes), then row-major little-endian float64 entries; metadata goes
# to a JSON sidecar next to the binary.
# ---------------------------------------------------------------------------

_MAGIC = b"FLBM"


def write_matrix(path, matrix):
    """Write a :class:`GalerkinMatrix` dump plus its ``.json`` sidecar."""
    N = matrix.n_panels
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", N, 0))
        f.write(b"\x00" * 4)
        f.write(np.ascontiguousarray(matrix.entries, dtype="<f8").tobytes("C"))
    sidecar = {
        "s": matrix.params.s,
        "mesh_hash": matrix.mesh_hash,
        "quadrature": {
            "gauss_order": matrix.quad.gauss_order,
            "graded_levels": matrix.quad.graded_levels,
            "near_field_ratio": matrix.quad.near_field_ratio,
        },
    }
    with open(str(path) + ".json", "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def read_matrix(path):
    """Read a matrix dump written by :func:`write_matrix`."""
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) != 16 or head[:4] != _MAGIC:
            raise FraclapError(f"{path}: not a matrix dump (bad magic)")
        (N,) = struct.unpack("<I", head[4:8])
        data = np.frombuffer(f.read(), dtype="<f8")
    if data.size != N * N:
        raise FraclapError(f"{path}: expected {N * N} entries, found {data.size}")
    with open(str(path) + ".json") as f:
        meta = json.load(f)
    quad = QuadratureConfig(
        gauss_order=meta["quadrature"]["gauss_order"],
        graded_levels=meta["quadrature"]["graded_levels"],
        near_field_ratio=meta["quadrature"]["near_field_ratio"],
    )
    return GalerkinMatrix(
        entries=data.reshape(N, N).copy(),
        mesh_hash=meta["mesh_hash"],
        params=FracParams(meta["s"]),
        quad=quad,
    )
