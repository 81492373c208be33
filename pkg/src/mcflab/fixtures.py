"""Mesh and signed-distance-field builders for the built-in surfaces.

Closed meshes are wound so that face normals point inward; open fixtures
(plane, saddle, bowl) state their normal side in their docstring.
"""

import numpy as np

from mcflab.geometry import TriMesh

# -- icosphere ---------------------------------------------------------------


def icosphere(subdivisions=4, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron projected to the sphere; normals inward."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)

    for _ in range(subdivisions):
        edge_mid = {}
        new_faces = []
        vlist = [verts]
        next_index = len(verts)

        def midpoint(a, b):
            nonlocal next_index
            key = (min(a, b), max(a, b))
            if key not in edge_mid:
                m = verts[a] + verts[b]
                m /= np.linalg.norm(m)
                vlist.append(m[None, :])
                edge_mid[key] = next_index
                next_index += 1
            return edge_mid[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.concatenate(vlist)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
        faces = np.array(new_faces, dtype=np.int64)

    # the table above is wound outward; flip for the inward convention
    faces = faces[:, [0, 2, 1]]
    return TriMesh(radius * verts + np.asarray(center, dtype=np.float64), faces)


# -- cylinders ---------------------------------------------------------------


def tube_mesh(radius=1.0, length=4.0, n_axial=None, n_theta=64,
              center=(0.0, 0.0, 0.0), periodic=False, target_edge=None):
    """Cylinder barrel around the x axis, inward normals.

    periodic=True builds a quotient mesh (periodic_x = length, x in [0, L));
    otherwise an open tube spanning [-L/2, L/2].
    """
    if target_edge is not None:
        n_theta = max(16, int(np.ceil(2 * np.pi * radius / target_edge)))
        n_axial = max(4, int(np.ceil(length / target_edge)))
    if n_axial is None:
        n_axial = max(4, int(round(length / (2 * np.pi * radius / n_theta))))
    c = np.asarray(center, dtype=np.float64)
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    if periodic:
        xs = np.linspace(0.0, length, n_axial, endpoint=False)
        rows = n_axial
    else:
        xs = np.linspace(-length / 2.0, length / 2.0, n_axial + 1)
        rows = n_axial + 1
    X, T = np.meshgrid(xs, theta, indexing="ij")
    verts = np.stack([X, radius * np.cos(T), radius * np.sin(T)], axis=-1)
    verts = verts.reshape(-1, 3) + c

    faces = []
    for i in range(rows if periodic else rows - 1):
        i2 = (i + 1) % rows
        for j in range(n_theta):
            j2 = (j + 1) % n_theta
            a = i * n_theta + j
            b = i * n_theta + j2
            d = i2 * n_theta + j
            e = i2 * n_theta + j2
            faces += [[a, b, e], [a, e, d]]
    faces = np.array(faces, dtype=np.int64)

    mesh = TriMesh(verts, faces, periodic_x=length if periodic else None,
                   check=False)
    # orient inward: normals should point toward the axis
    probe = verts[0] - c
    probe[0] = 0.0
    if np.dot(mesh.vertex_normals()[0], -probe) < 0:
        mesh = mesh.flipped()
    return mesh


def capped_cylinder_mesh(radius=1.0, half_length=2.0, n_theta=64,
                         center=(0.0, 0.0, 0.0)):
    """Closed cylinder along x with hemispherical caps, inward normals.

    Returns (mesh, barrel_mask); barrel vertices are those with
    |x - center_x| <= half_length.
    """
    c = np.asarray(center, dtype=np.float64)
    edge = 2 * np.pi * radius / n_theta
    n_axial = max(4, int(np.ceil(2 * half_length / edge)))
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    xs = np.linspace(-half_length, half_length, n_axial + 1)

    verts = []
    for x in xs:
        verts.append(np.stack([np.full(n_theta, x),
                               radius * np.cos(theta),
                               radius * np.sin(theta)], axis=-1))
    rows = n_axial + 1
    # hemispherical caps: latitude rings shrinking to a pole
    n_lat = max(2, n_theta // 4)
    phis = np.linspace(0.0, np.pi / 2.0, n_lat + 1)[1:]
    cap_rows_pos = []
    cap_rows_neg = []
    for phi in phis[:-1]:
        rr = radius * np.cos(phi)
        dx = radius * np.sin(phi)
        cap_rows_pos.append(np.stack([np.full(n_theta, half_length + dx),
                                      rr * np.cos(theta), rr * np.sin(theta)], axis=-1))
        cap_rows_neg.append(np.stack([np.full(n_theta, -half_length - dx),
                                      rr * np.cos(theta), rr * np.sin(theta)], axis=-1))
    pole_pos = np.array([[half_length + radius, 0.0, 0.0]])
    pole_neg = np.array([[-half_length - radius, 0.0, 0.0]])

    all_rows = cap_rows_neg[::-1] + verts + cap_rows_pos
    verts = np.concatenate([np.concatenate(all_rows), pole_neg, pole_pos]) + c
    total_rows = len(all_rows)
    ipole_neg = total_rows * n_theta
    ipole_pos = ipole_neg + 1

    faces = []
    for i in range(total_rows - 1):
        for j in range(n_theta):
            j2 = (j + 1) % n_theta
            a = i * n_theta + j
            b = i * n_theta + j2
            d = (i + 1) * n_theta + j
            e = (i + 1) * n_theta + j2
            faces += [[a, b, e], [a, e, d]]
    for j in range(n_theta):
        j2 = (j + 1) % n_theta
        faces.append([ipole_neg, j2, j])
        base = (total_rows - 1) * n_theta
        faces.append([ipole_pos, base + j, base + j2])
    faces = np.array(faces, dtype=np.int64)

    mesh = TriMesh(verts, faces, check=False)
    if np.dot(mesh.vertex_normals()[ipole_pos], np.array([-1.0, 0, 0])) < 0:
        mesh = mesh.flipped()
    barrel = np.abs(mesh.vertices[:, 0] - c[0]) <= half_length + 1e-12
    return mesh, barrel


# -- planar patches ----------------------------------------------------------


def graded_disk_mesh(outer_radius=6.0, inner_step=0.005, growth=1.12,
                     n_theta=64, center=(0.0, 0.0, 0.0), normal_sign=1.0):
    """Disk in the z = const plane with radially graded rings.

    Ring spacing grows geometrically away from the center, which keeps
    midpoint quadrature of kernels concentrated at the center accurate.
    Normal is +e3 (flip with normal_sign=-1).
    """
    radii = [0.0]
    step = inner_step
    while radii[-1] < outer_radius:
        radii.append(radii[-1] + step)
        step *= growth
    radii = np.array(radii)
    radii[-1] = outer_radius

    c = np.asarray(center, dtype=np.float64)
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    rings = [np.array([[0.0, 0.0, 0.0]])]
    for r in radii[1:]:
        rings.append(np.stack([r * np.cos(theta), r * np.sin(theta),
                               np.zeros(n_theta)], axis=-1))
    verts = np.concatenate(rings) + c

    faces = []
    for j in range(n_theta):
        faces.append([0, 1 + j, 1 + (j + 1) % n_theta])
    for i in range(len(radii) - 2):
        base_a = 1 + i * n_theta
        base_b = 1 + (i + 1) * n_theta
        for j in range(n_theta):
            j2 = (j + 1) % n_theta
            faces += [[base_a + j, base_b + j, base_b + j2],
                      [base_a + j, base_b + j2, base_a + j2]]
    faces = np.array(faces, dtype=np.int64)
    if normal_sign < 0:
        faces = faces[:, [0, 2, 1]]
    return TriMesh(verts, faces, check=False)


def plane_patch_mesh(extent=2.0, target_edge=0.05, center=(0.0, 0.0, 0.0),
                     normal_sign=1.0):
    """Uniform square patch in the z = const plane, normal +e3."""
    n = max(2, int(np.ceil(extent / target_edge)))
    xs = np.linspace(-extent / 2, extent / 2, n + 1)
    return _structured_graph_mesh(xs, xs, lambda X, Y: np.zeros_like(X),
                                  center, normal_sign)


def saddle_patch_mesh(extent=2.0, target_edge=0.05, bend=1.0,
                      center=(0.0, 0.0, 0.0)):
    """Graph z = bend (x^2 - y^2); kappa1 < 0 < kappa2 at the center."""
    n = max(2, int(np.ceil(extent / target_edge)))
    xs = np.linspace(-extent / 2, extent / 2, n + 1)
    return _structured_graph_mesh(xs, xs, lambda X, Y: bend * (X**2 - Y**2),
                                  center, 1.0)


def _structured_graph_mesh(xs, ys, height, center, normal_sign):
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Z = height(X, Y)
    verts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    verts += np.asarray(center, dtype=np.float64)
    nx, ny = X.shape
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = a + 1
            d = a + ny
            e = d + 1
            faces += [[a, d, e], [a, e, b]]
    faces = np.array(faces, dtype=np.int64)
    if normal_sign < 0:
        faces = faces[:, [0, 2, 1]]
    mesh = TriMesh(verts, faces, check=False)
    if mesh.vertex_normals()[:, 2].mean() * normal_sign < 0:
        mesh = mesh.flipped()
    return mesh


# -- signed distance fields ----------------------------------------------------


def sdf_sphere(x, center=(0.0, 0.0, 0.0), radius=1.0):
    d = x - np.asarray(center, dtype=np.float64)
    return np.linalg.norm(d, axis=-1) - radius


def sdf_cylinder_x(x, radius=1.0, center_yz=(0.0, 0.0)):
    """Infinite cylinder around an axis parallel to e1 (exact distance)."""
    cy, cz = center_yz
    return np.hypot(x[..., 1] - cy, x[..., 2] - cz) - radius


def sdf_plane_z(x, z0=0.0):
    return x[..., 2] - z0


def sdf_capsule_x(x, half_length, radius, center=(0.0, 0.0, 0.0)):
    """Finite cylinder with spherical caps along e1 (exact distance)."""
    d = x - np.asarray(center, dtype=np.float64)
    ax = np.clip(d[..., 0], -half_length, half_length)
    return np.sqrt((d[..., 0] - ax) ** 2 + d[..., 1] ** 2 + d[..., 2] ** 2) - radius


def sdf_torus(x, ring_radius=1.0, tube_radius=0.3, center=(0.0, 0.0, 0.0)):
    """Torus around the z axis (exact distance)."""
    d = x - np.asarray(center, dtype=np.float64)
    q = np.hypot(d[..., 0], d[..., 1]) - ring_radius
    return np.hypot(q, d[..., 2]) - tube_radius


def dumbbell_profile(xs, sphere_radius, neck_radius, separation,
                     neck_stiffness=2.0):
    """Radius profile of the dumbbell around the x axis.

    Two spheres at +-separation/2 joined by a cosh neck; the pointwise max
    of the smooth pieces has only convex creases, so the surface of
    revolution is mean-convex.
    """
    xs = np.asarray(xs, dtype=np.float64)
    half = separation / 2.0
    b = neck_stiffness * neck_radius
    sq1 = np.maximum(sphere_radius**2 - (xs - half) ** 2, 0.0)
    sq2 = np.maximum(sphere_radius**2 - (xs + half) ** 2, 0.0)
    neck = neck_radius * np.cosh(xs / b)
    # the neck piece only competes between the sphere centers
    neck = np.where(np.abs(xs) <= half, neck, 0.0)
    return np.maximum(np.sqrt(np.maximum(sq1, sq2)), neck)


def sdf_dumbbell(x, sphere_radius=1.0, neck_radius=0.2, separation=3.0,
                 neck_stiffness=2.0, center=(0.0, 0.0, 0.0)):
    """Dumbbell: two spheres joined by a mean-convex cosh neck (approximate
    distance; pass the field through reinitialization before flowing)."""
    d = x - np.asarray(center, dtype=np.float64)
    half = separation / 2.0
    b = neck_stiffness * neck_radius
    s1 = np.sqrt((d[..., 0] - half) ** 2 + d[..., 1] ** 2 + d[..., 2] ** 2) - sphere_radius
    s2 = np.sqrt((d[..., 0] + half) ** 2 + d[..., 1] ** 2 + d[..., 2] ** 2) - sphere_radius
    s = np.hypot(d[..., 1], d[..., 2])
    prof = neck_radius * np.cosh(np.clip(d[..., 0], -half, half) / b)
    slope = np.sinh(np.clip(d[..., 0], -half, half) / b)
    neck = (s - prof) / np.sqrt(1.0 + slope**2)
    neck = np.where(np.abs(d[..., 0]) <= half, neck, np.inf)
    return np.minimum(np.minimum(s1, s2), neck)


def sdf_spoked_wheel(x, ring_radius=1.0, tube_radius=0.12, n_spokes=8,
                     spoke_radius=0.08, hub_radius=0.25,
                     center=(0.0, 0.0, 0.0)):
    """Wheel with spokes in the z = 0 plane: torus + radial capsules + hub.

    Exploratory fixture only; no claim that it fattens at desk resolution.
    """
    d = x - np.asarray(center, dtype=np.float64)
    best = sdf_torus(d, ring_radius, tube_radius)
    best = np.minimum(best, np.linalg.norm(d, axis=-1) - hub_radius)
    for k in range(n_spokes):
        ang = 2 * np.pi * k / n_spokes
        c, s = np.cos(ang), np.sin(ang)
        u = d[..., 0] * c + d[..., 1] * s
        v = -d[..., 0] * s + d[..., 1] * c
        ax = np.clip(u, 0.0, ring_radius)
        spoke = np.sqrt((u - ax) ** 2 + v**2 + d[..., 2] ** 2) - spoke_radius
        best = np.minimum(best, spoke)
    return best
