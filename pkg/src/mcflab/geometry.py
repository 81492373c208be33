"""Discrete surfaces and pointwise differential geometry.

A TriMesh is an oriented triangle mesh; per-vertex geometry (unit normal,
mean curvature H = kappa1 + kappa2, second fundamental form, area weight)
comes from a local quadric fit over the tangent plane, so the full shape
operator is available, not just H.

Convention: for closed surfaces the face winding is chosen so normals point
inward, and curvatures are signed with respect to that inward normal (the
unit sphere has kappa1 = kappa2 = 1, H = 2).  Open fixture meshes state
their own normal side at construction.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from mcflab.errors import DegenerateNeighborhood

DEGENERACY_FLOOR = 1e-12  # minimum face area, relative to bbox diagonal^2
MIN_NEIGHBORS = 5


@dataclass(frozen=True)
class SpaceTimePoint:
    """A center X0 = (x0, t0) for densities, rescalings and renormalization."""

    x0: np.ndarray
    t0: float

    def __post_init__(self):
        x = np.asarray(self.x0, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(x)) and np.isfinite(self.t0)):
            raise ValueError("space-time point must be finite")
        object.__setattr__(self, "x0", x)
        object.__setattr__(self, "t0", float(self.t0))


@dataclass(frozen=True)
class ParabolicBall:
    """B(x0, r) x (t0 - r^2, t0]."""

    center: SpaceTimePoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("parabolic ball radius must be positive")

    @property
    def t_min(self):
        return self.center.t0 - self.radius**2

    @property
    def t_max(self):
        return self.center.t0


@dataclass
class VertexGeometry:
    """Pointwise geometry at one vertex.

    A is the symmetric 2x2 second fundamental form [[a11, a12], [a12, a22]]
    expressed in the orthonormal tangent basis ``tangent``; its eigenvalues
    are (kappa1, kappa2) and H = kappa1 + kappa2 exactly.
    """

    normal: np.ndarray
    H: float
    A: np.ndarray
    kappa1: float
    kappa2: float
    mu_weight: float
    tangent: np.ndarray


@dataclass
class GeometryTable:
    """Vectorized per-vertex geometry for a whole mesh."""

    normal: np.ndarray      # (n,3) unit, inward for closed meshes
    H: np.ndarray           # (n,)
    kappa1: np.ndarray      # (n,)  kappa1 <= kappa2
    kappa2: np.ndarray
    A: np.ndarray           # (n,3) packed [a11, a12, a22]
    tangent: np.ndarray     # (n,2,3) orthonormal tangent basis
    mu: np.ndarray          # (n,) barycentric area weights
    boundary: np.ndarray    # (n,) bool

    @property
    def abs_A2(self):
        return self.kappa1**2 + self.kappa2**2

    def vertex(self, i):
        a11, a12, a22 = self.A[i]
        return VertexGeometry(
            normal=self.normal[i],
            H=float(self.H[i]),
            A=np.array([[a11, a12], [a12, a22]]),
            kappa1=float(self.kappa1[i]),
            kappa2=float(self.kappa2[i]),
            mu_weight=float(self.mu[i]),
            tangent=self.tangent[i],
        )


class TriMesh:
    """Oriented triangle mesh, optionally periodic along the x axis.

    Parameters
    ----------
    vertices : (n,3) array
    faces : (m,3) int array, consistently wound (adjacent faces induce
        opposite directions on a shared edge).
    periodic_x : float or None
        Period length; offsets along x are reduced to the minimal image,
        which makes a welded tube behave as a closed quotient mesh.
    """

    def __init__(self, vertices, faces, periodic_x=None, check=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int32)
        self.periodic_x = None if periodic_x is None else float(periodic_x)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (n,3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (m,3)")
        self._cache = {}
        if check:
            self._validate()

    # -- structure ---------------------------------------------------------

    def _validate(self):
        n = len(self.vertices)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= n):
            raise ValueError("face index out of range")
        f = self.faces
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ValueError("face repeats a vertex")
        floor = DEGENERACY_FLOOR * self.bbox_diagonal() ** 2
        if self.faces.size and self.face_areas().min() < floor:
            raise ValueError("face area below degeneracy floor")
        counts = self._directed_edge_counts()
        if counts["max_directed"] > 1:
            raise ValueError("inconsistent orientation: repeated directed edge")
        if counts["max_undirected"] > 2:
            raise ValueError("non-manifold edge (shared by more than 2 faces)")

    def _directed_edge_counts(self):
        f = self.faces.astype(np.int64)
        n = len(self.vertices)
        ea = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
        eb = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
        directed = ea * n + eb
        und = np.minimum(ea, eb) * n + np.maximum(ea, eb)
        _, cd = np.unique(directed, return_counts=True)
        uu, cu = np.unique(und, return_counts=True)
        return {
            "max_directed": int(cd.max()) if cd.size else 0,
            "max_undirected": int(cu.max()) if cu.size else 0,
            "boundary_und": uu[cu == 1],
        }

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def is_closed(self):
        counts = self._directed_edge_counts()
        return counts["boundary_und"].size == 0

    def boundary_vertices(self):
        """Bool mask of vertices on a boundary edge."""
        key = "boundary_vertices"
        if key not in self._cache:
            und = self._directed_edge_counts()["boundary_und"]
            n = len(self.vertices)
            mask = np.zeros(n, dtype=bool)
            mask[und // n] = True
            mask[und % n] = True
            self._cache[key] = mask
        return self._cache[key]

    # -- metric quantities --------------------------------------------------

    def wrap_offsets(self, d):
        """Reduce offset vectors to the minimal image for periodic meshes."""
        if self.periodic_x is not None:
            d = d.copy()
            L = self.periodic_x
            d[..., 0] -= L * np.round(d[..., 0] / L)
        return d

    def _face_edge_vectors(self):
        v = self.vertices
        f = self.faces
        e1 = self.wrap_offsets(v[f[:, 1]] - v[f[:, 0]])
        e2 = self.wrap_offsets(v[f[:, 2]] - v[f[:, 0]])
        return e1, e2

    def face_normals(self, normalized=True):
        key = ("face_normals", normalized)
        if key not in self._cache:
            e1, e2 = self._face_edge_vectors()
            nrm = np.cross(e1, e2)
            if normalized:
                nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
            self._cache[key] = nrm
        return self._cache[key]

    def face_areas(self):
        if "face_areas" not in self._cache:
            e1, e2 = self._face_edge_vectors()
            self._cache["face_areas"] = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        return self._cache["face_areas"]

    def total_area(self):
        return float(self.face_areas().sum())

    def vertex_area_weights(self):
        """Barycentric lumping: one third of incident face areas per vertex."""
        if "mu" not in self._cache:
            mu = np.zeros(len(self.vertices))
            third = self.face_areas() / 3.0
            for c in range(3):
                np.add.at(mu, self.faces[:, c], third)
            self._cache["mu"] = mu
        return self._cache["mu"]

    def vertex_normals(self):
        """Area-weighted average of incident oriented face normals."""
        if "vertex_normals" not in self._cache:
            acc = np.zeros_like(self.vertices)
            fn = self.face_normals(normalized=False)
            for c in range(3):
                np.add.at(acc, self.faces[:, c], fn)
            nrm = np.linalg.norm(acc, axis=1, keepdims=True)
            nrm[nrm == 0.0] = 1.0
            self._cache["vertex_normals"] = acc / nrm
        return self._cache["vertex_normals"]

    def centroid(self):
        return self.vertices.mean(axis=0)

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self):
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def mean_edge_length(self):
        v, f = self.vertices, self.faces
        e = np.concatenate([
            self.wrap_offsets(v[f[:, 1]] - v[f[:, 0]]),
            self.wrap_offsets(v[f[:, 2]] - v[f[:, 1]]),
            self.wrap_offsets(v[f[:, 0]] - v[f[:, 2]]),
        ])
        return float(np.linalg.norm(e, axis=1).mean())

    # -- adjacency ----------------------------------------------------------

    def vertex_adjacency(self):
        if "adj" not in self._cache:
            f = self.faces
            n = len(self.vertices)
            rows = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
            cols = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
            data = np.ones(len(rows), dtype=np.int8)
            adj = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
            adj.data[:] = 1
            self._cache["adj"] = adj
        return self._cache["adj"]

    def two_ring(self):
        """CSR (indptr, indices) of the 2-ring neighborhood, self excluded."""
        if "ring2" not in self._cache:
            adj = self.vertex_adjacency()
            ring = adj + adj @ adj
            ring = ring.tolil()
            ring.setdiag(0)
            ring = ring.tocsr()
            ring.eliminate_zeros()
            self._cache["ring2"] = (ring.indptr.copy(), ring.indices.copy())
        return self._cache["ring2"]

    # -- transforms ----------------------------------------------------------

    def translated(self, dx):
        return TriMesh(self.vertices + np.asarray(dx, dtype=np.float64),
                       self.faces, periodic_x=self.periodic_x, check=False)

    def scaled(self, lam, center=(0.0, 0.0, 0.0)):
        """New mesh with vertices lam * (v - center); used by rescalings."""
        c = np.asarray(center, dtype=np.float64)
        per = None if self.periodic_x is None else self.periodic_x * lam
        return TriMesh(lam * (self.vertices - c), self.faces,
                       periodic_x=per, check=False)

    def flipped(self):
        """Reverse orientation (normals flip side)."""
        f = self.faces[:, [0, 2, 1]]
        return TriMesh(self.vertices, f, periodic_x=self.periodic_x, check=False)

    # -- geometry ------------------------------------------------------------

    def geometry(self, passes=2):
        key = ("geometry", passes)
        if key not in self._cache:
            self._cache[key] = _quadric_geometry(self, passes)
        return self._cache[key]


def estimate_vertex_geometry(mesh, vertex_index, passes=2):
    """Quadric-fit geometry at one vertex (see GeometryTable for all)."""
    table = mesh.geometry(passes=passes)
    return table.vertex(vertex_index)


def _quadric_geometry(mesh, passes):
    v = mesh.vertices
    n = len(v)
    indptr, indices = mesh.two_ring()
    counts = np.diff(indptr)
    if counts.min(initial=MIN_NEIGHBORS) < MIN_NEIGHBORS:
        bad = np.flatnonzero(counts < MIN_NEIGHBORS)
        raise DegenerateNeighborhood(
            f"{bad.size} vertices have fewer than {MIN_NEIGHBORS} 2-ring "
            f"neighbors (first: {bad[:5].tolist()})")

    K = int(counts.max())
    nb = np.full((n, K), -1, dtype=np.int64)
    mask = np.zeros((n, K), dtype=bool)
    take = np.arange(K)[None, :] < counts[:, None]
    nb[take] = indices
    mask[take] = True
    nb_safe = np.where(nb >= 0, nb, 0)

    offsets = mesh.wrap_offsets(v[nb_safe] - v[:, None, :])
    offsets[~mask] = 0.0

    normal = mesh.vertex_normals().copy()
    kappa1 = np.empty(n)
    kappa2 = np.empty(n)
    A_packed = np.empty((n, 3))
    tangent = np.empty((n, 2, 3))

    for _ in range(passes):
        e1 = _any_orthonormal(normal)
        e2 = np.cross(normal, e1)
        xi = np.einsum("nkd,nd->nk", offsets, e1)
        eta = np.einsum("nkd,nd->nk", offsets, e2)
        w = np.einsum("nkd,nd->nk", offsets, normal)

        scale = np.sqrt((xi**2 + eta**2).sum(axis=1) / counts)
        scale[scale == 0.0] = 1.0
        xs = xi / scale[:, None]
        es = eta / scale[:, None]
        ws = w / scale[:, None]

        phi = np.stack([xs * xs, xs * es, es * es, xs, es], axis=-1)
        phi[~mask] = 0.0
        G = np.einsum("nka,nkb->nab", phi, phi)
        rhs = np.einsum("nka,nk->na", phi, ws)

        sign, logdet = np.linalg.slogdet(G)
        degenerate = (sign <= 0) | (logdet < np.log(1e-24))
        if np.any(degenerate):
            raise DegenerateNeighborhood(
                f"rank-deficient quadric fit at vertices "
                f"{np.flatnonzero(degenerate)[:5].tolist()}")
        coef = np.linalg.solve(G, rhs[..., None])[..., 0]

        a = coef[:, 0] / scale
        b = coef[:, 1] / scale
        c = coef[:, 2] / scale
        d = coef[:, 3]
        e = coef[:, 4]

        Wg = np.sqrt(1.0 + d * d + e * e)
        new_normal = normal - d[:, None] * e1 - e[:, None] * e2
        new_normal /= np.linalg.norm(new_normal, axis=1, keepdims=True)

        # shape operator in the orthonormalized tangent frame:
        # M = g^{-1/2} II g^{-1/2}, g = I + grad w grad w^T, II = Hess w / W
        g11 = 1.0 + d * d
        g12 = d * e
        g22 = 1.0 + e * e
        sdet = Wg  # sqrt(det g) = W
        trace_g = g11 + g22
        denom = np.sqrt(trace_g + 2.0 * sdet)
        # g^{1/2} = (g + sqrt(det) I)/denom ; invert the 2x2 directly
        s11 = (g11 + sdet) / denom
        s12 = g12 / denom
        s22 = (g22 + sdet) / denom
        det_s = s11 * s22 - s12 * s12
        i11, i12, i22 = s22 / det_s, -s12 / det_s, s11 / det_s

        h11 = 2.0 * a / Wg
        h12 = b / Wg
        h22 = 2.0 * c / Wg
        m11 = i11 * (h11 * i11 + h12 * i12) + i12 * (h12 * i11 + h22 * i12)
        m12 = i11 * (h11 * i12 + h12 * i22) + i12 * (h12 * i12 + h22 * i22)
        m22 = i12 * (h11 * i12 + h12 * i22) + i22 * (h12 * i12 + h22 * i22)

        mean = 0.5 * (m11 + m22)
        dev = np.sqrt(np.maximum(0.25 * (m11 - m22) ** 2 + m12 * m12, 0.0))
        kappa1 = mean - dev
        kappa2 = mean + dev
        A_packed = np.stack([m11, m12, m22], axis=1)

        # orthonormal frame carrying the packed form: [T1, T2] g^{-1/2}
        T1 = e1 + d[:, None] * normal
        T2 = e2 + e[:, None] * normal
        tangent = np.stack([
            i11[:, None] * T1 + i12[:, None] * T2,
            i12[:, None] * T1 + i22[:, None] * T2,
        ], axis=1)
        normal = new_normal

    return GeometryTable(
        normal=normal,
        H=kappa1 + kappa2,
        kappa1=kappa1,
        kappa2=kappa2,
        A=A_packed,
        tangent=tangent,
        mu=mesh.vertex_area_weights(),
        boundary=mesh.boundary_vertices(),
    )


def _any_orthonormal(normal):
    """A unit vector field orthogonal to each row of ``normal``."""
    ref = np.zeros_like(normal)
    smallest = np.argmin(np.abs(normal), axis=1)
    ref[np.arange(len(normal)), smallest] = 1.0
    e1 = np.cross(normal, ref)
    return e1 / np.linalg.norm(e1, axis=1, keepdims=True)
