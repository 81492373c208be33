"""Closed-form and semi-analytic reference solutions.

The shrinking sphere r(t) = sqrt(R^2 - 4t) and cylinder r(t) = sqrt(R^2 - 2t)
are ground truth for the solver and monitor tests; the bowl fixture is the
rotationally symmetric translator, integrated from its profile ODE.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from mcflab.errors import Extinct, IntegrationFailure
from mcflab.fixtures import icosphere, tube_mesh
from mcflab.geometry import SpaceTimePoint, TriMesh
from mcflab.records import EXTINCT, FlowRecord, Snapshot, Termination


@dataclass(frozen=True)
class ShrinkerSpec:
    """A self-shrinking reference solution, scale R at reference time 0."""

    kind: str                      # "sphere" | "cylinder" | "plane"
    scale: float = 1.0
    axis: tuple = (1.0, 0.0, 0.0)  # cylinder only
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("sphere", "cylinder", "plane"):
            raise ValueError(f"unknown shrinker kind {self.kind!r}")
        if self.kind != "plane" and not self.scale > 0:
            raise ValueError("scale must be positive")
        ax = np.asarray(self.axis, dtype=np.float64)
        if self.kind == "cylinder" and not np.isclose(np.linalg.norm(ax), 1.0):
            raise ValueError("cylinder axis must be a unit vector")

    def singular_time(self):
        if self.kind == "sphere":
            return self.scale**2 / 4.0
        if self.kind == "cylinder":
            return self.scale**2 / 2.0
        return np.inf

    def singular_point(self):
        return SpaceTimePoint(np.asarray(self.center), self.singular_time())


def sphere_radius(R, t):
    """Radius of the shrinking round sphere, r(t) = sqrt(R^2 - 4t)."""
    if t >= R * R / 4.0:
        raise Extinct(f"sphere of initial radius {R} is extinct at t={t}",
                      extinction_time=R * R / 4.0)
    return float(np.sqrt(R * R - 4.0 * t))


def cylinder_radius(R, t):
    """Radius of the shrinking round cylinder, r(t) = sqrt(R^2 - 2t)."""
    if t >= R * R / 2.0:
        raise Extinct(f"cylinder of initial radius {R} is extinct at t={t}",
                      extinction_time=R * R / 2.0)
    return float(np.sqrt(R * R - 2.0 * t))


def shrinker_residual(mesh, t):
    """Sup-norm self-shrinker residual max |H - <x, nu>/(2t)| over vertices.

    Vanishes exactly on surfaces satisfying the shrinker equation centered
    at the space-time origin; t must be negative.
    """
    if not t < 0:
        raise ValueError("shrinker residual requires t < 0")
    g = mesh.geometry()
    x_perp = np.einsum("nd,nd->n", mesh.vertices, g.normal)
    res = np.abs(g.H - x_perp / (2.0 * t))
    interior = ~g.boundary
    if interior.any():
        res = res[interior]
    return float(res.max())


# -- exact flow records ---------------------------------------------------------


def make_sphere_flow(R=1.0, center=(0.0, 0.0, 0.0), t_start=0.0, t_end=None,
                     n_snapshots=41, subdivisions=5):
    """Exact shrinking-sphere record; snapshots share connectivity."""
    spec = ShrinkerSpec("sphere", R, center=center)
    t_sing = spec.singular_time()
    if t_end is None:
        t_end = t_start + 0.96 * (t_sing - t_start)
    if not t_start < t_end < t_sing:
        raise ValueError("need t_start < t_end < extinction time")
    template = icosphere(subdivisions=subdivisions)
    c = np.asarray(center, dtype=np.float64)

    def slice_at(t):
        r = sphere_radius(R, t)
        return TriMesh(c + r * template.vertices, template.faces, check=False)

    times = np.linspace(t_start, t_end, n_snapshots)
    snaps = [Snapshot(t, mesh=slice_at(t)) for t in times]
    term = Termination(EXTINCT, time=t_sing,
                       candidates=[SpaceTimePoint(c, t_sing)])
    mesh0 = snaps[0].mesh()
    return FlowRecord(snaps, scheme="exact", h=mesh0.mean_edge_length(),
                      termination=term, exact_slice=slice_at,
                      time_range=(t_start, t_end))


def make_cylinder_flow(R=1.0, length=8.0, center=(0.0, 0.0, 0.0),
                       t_start=0.0, t_end=None, n_snapshots=41,
                       n_theta=96, periodic=True, target_edge=None):
    """Exact shrinking-cylinder record around an axis through ``center``
    parallel to e1.  periodic=False gives an open tube (long fixtures for
    density integrals); periodic=True a closed quotient mesh."""
    spec = ShrinkerSpec("cylinder", R, center=center)
    t_sing = spec.singular_time()
    if t_end is None:
        t_end = t_start + 0.96 * (t_sing - t_start)
    if not t_start < t_end < t_sing:
        raise ValueError("need t_start < t_end < extinction time")
    template = tube_mesh(radius=1.0, length=length, n_theta=n_theta,
                         periodic=periodic, target_edge=target_edge)
    c = np.asarray(center, dtype=np.float64)

    def slice_at(t):
        r = cylinder_radius(R, t)
        v = template.vertices.copy()
        v[:, 1:] *= r
        return TriMesh(v + c, template.faces, periodic_x=template.periodic_x,
                       check=False)

    times = np.linspace(t_start, t_end, n_snapshots)
    snaps = [Snapshot(t, mesh=slice_at(t)) for t in times]
    term = Termination(EXTINCT, time=t_sing,
                       candidates=[SpaceTimePoint(c, t_sing)])
    return FlowRecord(snaps, scheme="exact", h=template.mean_edge_length(),
                      termination=term, exact_slice=slice_at,
                      time_range=(t_start, t_end))


def make_static_plane_flow(mesh, t_start=0.0, t_end=1.0, n_snapshots=9):
    """A minimal surface as a static record (planes, saddles)."""

    def slice_at(t):
        return mesh

    times = np.linspace(t_start, t_end, n_snapshots)
    snaps = [Snapshot(t, mesh=mesh) for t in times]
    return FlowRecord(snaps, scheme="exact", h=mesh.mean_edge_length(),
                      exact_slice=slice_at, time_range=(t_start, t_end))


# -- bowl soliton -----------------------------------------------------------------


def bowl_profile(tip_curvature=1.0, extent=10.0, n_points=400):
    """Profile z(rho) of the rotationally symmetric translator.

    The graph translates with speed v = 2 * tip_curvature; its profile
    solves z'' = (v - z'/rho)(1 + z'^2), z'(0) = 0.  Returns (rho, z, v).
    """
    if extent <= 0:
        raise IntegrationFailure("bowl extent must be positive")
    v = 2.0 * float(tip_curvature)
    rho0 = 1e-8 * extent

    def rhs(rho, y):
        p = y[0]
        return [(v - p / rho) * (1.0 + p * p)]

    sol = solve_ivp(rhs, (rho0, extent), [0.5 * v * rho0], dense_output=True,
                    rtol=1e-10, atol=1e-12, max_step=extent / 50.0)
    if not sol.success:
        raise IntegrationFailure(f"translator profile ODE failed: {sol.message}")
    rho = np.linspace(rho0, extent, n_points)
    p = sol.sol(rho)[0]
    z = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(rho))])
    # refine the height by trapezoid on a fine grid for smoothness
    fine = np.linspace(rho0, extent, 20 * n_points)
    pf = sol.sol(fine)[0]
    zf = np.concatenate([[0.0], np.cumsum(0.5 * (pf[1:] + pf[:-1]) * np.diff(fine))])
    z = np.interp(rho, fine, zf)
    return rho, z, v


def build_bowl_fixture(tip_curvature=1.0, extent=10.0, n_theta=96,
                       target_edge=None):
    """Mesh of the translating bowl, tip at the origin, opening toward +e3.

    Normal convention: normals point into the bowl (+e3 side at the tip),
    so H > 0 everywhere and the soliton translates along +e3 with speed
    2 * tip_curvature.
    """
    if target_edge is None:
        target_edge = extent / 120.0
    n_rho = max(8, int(np.ceil(extent / target_edge)))
    rho_grid, z_grid, _ = bowl_profile(tip_curvature, extent,
                                       n_points=max(400, 2 * n_rho))
    rho = np.linspace(rho_grid[0], extent, n_rho)
    z = np.interp(rho, rho_grid, z_grid)

    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    rings = [np.array([[0.0, 0.0, 0.0]])]
    for rr, zz in zip(rho, z):
        rings.append(np.stack([rr * np.cos(theta), rr * np.sin(theta),
                               np.full(n_theta, zz)], axis=-1))
    verts = np.concatenate(rings)

    faces = []
    for j in range(n_theta):
        faces.append([0, 1 + j, 1 + (j + 1) % n_theta])
    for i in range(n_rho - 1):
        a = 1 + i * n_theta
        b = 1 + (i + 1) * n_theta
        for j in range(n_theta):
            j2 = (j + 1) % n_theta
            faces += [[a + j, b + j, b + j2], [a + j, b + j2, a + j2]]
    mesh = TriMesh(verts, np.array(faces, dtype=np.int64), check=False)
    if mesh.vertex_normals()[0][2] < 0:
        mesh = mesh.flipped()
    return mesh


def make_bowl_flow(tip_curvature=1.0, extent=10.0, t_start=-40.0, t_end=0.0,
                   n_snapshots=33, n_theta=96, target_edge=None):
    """Translating-bowl record: M_t = M_0 + t v e3, v = 2 tip_curvature."""
    mesh0 = build_bowl_fixture(tip_curvature, extent, n_theta=n_theta,
                               target_edge=target_edge)
    v = 2.0 * tip_curvature

    def slice_at(t):
        return mesh0.translated((0.0, 0.0, v * t))

    times = np.linspace(t_start, t_end, n_snapshots)
    snaps = [Snapshot(t, mesh=slice_at(t)) for t in times]
    return FlowRecord(snaps, scheme="exact", h=mesh0.mean_edge_length(),
                      exact_slice=slice_at, time_range=(t_start, t_end))
