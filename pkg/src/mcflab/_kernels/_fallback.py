"""Pure-numpy implementations of the hot kernels.

These mirror the compiled extension in mcflab._kernels._native; the test
suite cross-checks both backends on identical inputs.  Formulas:

* curvature motion   du/dt = kappa |grad u|
                     = [u_xx(u_y^2+u_z^2) + u_yy(u_x^2+u_z^2) + u_zz(u_x^2+u_y^2)
                        - 2(u_x u_y u_xy + u_x u_z u_xz + u_y u_z u_yz)] / |grad u|^2
* reinitialization   du/dtau = -S(u0) (|grad u|_Godunov - 1), with a subcell
                     fix pinning interface-adjacent nodes to first-order
                     signed distances so the zero set does not drift.
"""

import numpy as np


def _axis_index(i, n, wrap):
    if wrap:
        return np.mod(i, n)
    return np.clip(i, 0, n - 1)


def _neighbors(u, i, j, k, di, dj, dk, wrap):
    nx, ny, nz = u.shape
    ii = _axis_index(i + di, nx, wrap[0])
    jj = _axis_index(j + dj, ny, wrap[1])
    kk = _axis_index(k + dk, nz, wrap[2])
    return u[ii, jj, kk]


def band_cutoff(s, beta, gamma):
    """C^1 ramp: 1 for s <= beta, 0 for s >= gamma (Peng-style narrow band).

    Damping updates near the band edge keeps stale frozen neighbors from
    injecting O(1/h) curvature errors that would creep to the interface.
    """
    t = (s - gamma) ** 2 * (2.0 * s + gamma - 3.0 * beta) / (gamma - beta) ** 3
    return np.where(s <= beta, 1.0, np.where(s >= gamma, 0.0, t))


def curvature_motion_step(u, idx, h, dt, eps2, wrap, beta, gamma):
    """One explicit Euler step of curvature motion on the band nodes.

    u : (nx,ny,nz) float64; idx : (m,3) int32 band node indices;
    wrap : length-3 bool sequence of periodic axes; beta/gamma : smooth
    cutoff distances (full update for |u| <= beta, none beyond gamma).
    Returns the (m,) updated values (u itself is not modified).
    """
    i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
    c = u[i, j, k]
    uxp = _neighbors(u, i, j, k, 1, 0, 0, wrap)
    uxm = _neighbors(u, i, j, k, -1, 0, 0, wrap)
    uyp = _neighbors(u, i, j, k, 0, 1, 0, wrap)
    uym = _neighbors(u, i, j, k, 0, -1, 0, wrap)
    uzp = _neighbors(u, i, j, k, 0, 0, 1, wrap)
    uzm = _neighbors(u, i, j, k, 0, 0, -1, wrap)

    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / (h * h)
    ux = (uxp - uxm) * inv2h
    uy = (uyp - uym) * inv2h
    uz = (uzp - uzm) * inv2h
    uxx = (uxp - 2.0 * c + uxm) * invh2
    uyy = (uyp - 2.0 * c + uym) * invh2
    uzz = (uzp - 2.0 * c + uzm) * invh2

    inv4h2 = 1.0 / (4.0 * h * h)
    uxy = (
        _neighbors(u, i, j, k, 1, 1, 0, wrap)
        - _neighbors(u, i, j, k, 1, -1, 0, wrap)
        - _neighbors(u, i, j, k, -1, 1, 0, wrap)
        + _neighbors(u, i, j, k, -1, -1, 0, wrap)
    ) * inv4h2
    uxz = (
        _neighbors(u, i, j, k, 1, 0, 1, wrap)
        - _neighbors(u, i, j, k, 1, 0, -1, wrap)
        - _neighbors(u, i, j, k, -1, 0, 1, wrap)
        + _neighbors(u, i, j, k, -1, 0, -1, wrap)
    ) * inv4h2
    uyz = (
        _neighbors(u, i, j, k, 0, 1, 1, wrap)
        - _neighbors(u, i, j, k, 0, 1, -1, wrap)
        - _neighbors(u, i, j, k, 0, -1, 1, wrap)
        + _neighbors(u, i, j, k, 0, -1, -1, wrap)
    ) * inv4h2

    ux2, uy2, uz2 = ux * ux, uy * uy, uz * uz
    g2 = ux2 + uy2 + uz2
    num = (
        uxx * (uy2 + uz2)
        + uyy * (ux2 + uz2)
        + uzz * (ux2 + uy2)
        - 2.0 * (ux * uy * uxy + ux * uz * uxz + uy * uz * uyz)
    )
    damp = band_cutoff(np.abs(c), beta, gamma)
    return c + damp * (dt * num / (g2 + eps2))


def reinit_steps(u, idx, sgn, is_near, d_near, h, dt, n_iter, wrap):
    """Jacobi sweeps of Godunov reinitialization on the band nodes.

    sgn : (m,) smoothed sign of the pre-reinit field (its sign selects the
    upwind branch); is_near : (m,) bool marking interface-adjacent nodes;
    d_near : (m,) their target signed distances.  Returns a full-grid copy
    of u with the band updated.
    """
    out = u.copy()
    i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
    rate = dt / h
    pos = sgn > 0.0
    for _ in range(n_iter):
        c = out[i, j, k]
        uxp = _neighbors(out, i, j, k, 1, 0, 0, wrap)
        uxm = _neighbors(out, i, j, k, -1, 0, 0, wrap)
        uyp = _neighbors(out, i, j, k, 0, 1, 0, wrap)
        uym = _neighbors(out, i, j, k, 0, -1, 0, wrap)
        uzp = _neighbors(out, i, j, k, 0, 0, 1, wrap)
        uzm = _neighbors(out, i, j, k, 0, 0, -1, wrap)
        invh = 1.0 / h
        dxm, dxp = (c - uxm) * invh, (uxp - c) * invh
        dym, dyp = (c - uym) * invh, (uyp - c) * invh
        dzm, dzp = (c - uzm) * invh, (uzp - c) * invh

        def _g2(dm, dp):
            a = np.where(pos, np.maximum(dm, 0.0), np.minimum(dm, 0.0))
            b = np.where(pos, np.minimum(dp, 0.0), np.maximum(dp, 0.0))
            return np.maximum(a * a, b * b)

        grad = np.sqrt(_g2(dxm, dxp) + _g2(dym, dyp) + _g2(dzm, dzp))
        new = c - dt * sgn * (grad - 1.0)
        near = c - rate * (np.sign(d_near) * np.abs(c) - d_near)
        out[i, j, k] = np.where(is_near, near, new)
    return out


def z_extrema_bruteforce(pts, nrm, chunk=256):
    """Exact O(n^2) sup/inf of 2<y-x,nu(x)>/|y-x|^2 over vertex pairs.

    Returns (z_max, z_min, arg_max, arg_min).
    """
    n = pts.shape[0]
    z_max = np.full(n, -np.inf)
    z_min = np.full(n, np.inf)
    arg_max = np.zeros(n, dtype=np.int64)
    arg_min = np.zeros(n, dtype=np.int64)
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        d = pts[None, :, :] - pts[s:e, None, :]
        den = np.einsum("cnd,cnd->cn", d, d)
        num = 2.0 * np.einsum("cnd,cd->cn", d, nrm[s:e])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / den
        rows = np.arange(e - s)
        ratio[rows, np.arange(s, e)] = np.nan
        bad = ~np.isfinite(ratio)
        hi = np.where(bad, -np.inf, ratio)
        lo = np.where(bad, np.inf, ratio)
        arg_max[s:e] = np.argmax(hi, axis=1)
        arg_min[s:e] = np.argmin(lo, axis=1)
        z_max[s:e] = hi[rows, arg_max[s:e]]
        z_min[s:e] = lo[rows, arg_min[s:e]]
    return z_max, z_min, arg_max, arg_min


def z_extrema_pruned(pts, nrm, order, starts, box_lo, box_hi):
    """Branch-and-bound version of z_extrema_bruteforce over a cell grid.

    order/starts : CSR layout of vertex indices grouped by cell;
    box_lo/box_hi : (ncell,3) tight AABBs of each cell's members.
    Must agree with the brute force result to ~1e-10.
    """
    n = pts.shape[0]
    ncell = starts.shape[0] - 1
    centers = 0.5 * (box_lo + box_hi)
    half = 0.5 * (box_hi - box_lo)
    z_max = np.full(n, -np.inf)
    z_min = np.full(n, np.inf)
    arg_max = np.zeros(n, dtype=np.int64)
    arg_min = np.zeros(n, dtype=np.int64)

    cell_of = np.empty(n, dtype=np.int64)
    for c in range(ncell):
        cell_of[order[starts[c]:starts[c + 1]]] = c

    for v in range(n):
        x = pts[v]
        nu = nrm[v]
        best_hi, best_lo = -np.inf, np.inf
        a_hi = a_lo = 0

        def _scan(cell_idx):
            nonlocal best_hi, best_lo, a_hi, a_lo
            members = order[starts[cell_idx]:starts[cell_idx + 1]]
            d = pts[members] - x
            den = np.einsum("md,md->m", d, d)
            num = 2.0 * (d @ nu)
            ok = den > 0.0
            if not np.any(ok):
                return
            ratio = np.where(ok, num / np.where(ok, den, 1.0), np.nan)
            hi = np.where(ok, ratio, -np.inf)
            lo = np.where(ok, ratio, np.inf)
            ih, il = np.argmax(hi), np.argmin(lo)
            if hi[ih] > best_hi:
                best_hi, a_hi = hi[ih], members[ih]
            if lo[il] < best_lo:
                best_lo, a_lo = lo[il], members[il]

        _scan(cell_of[v])

        dc = centers - x
        proj = 2.0 * (dc @ nu)
        spread = 2.0 * (half @ np.abs(nu))
        axdist = np.abs(dc)
        d_lo2 = np.sum(np.maximum(axdist - half, 0.0) ** 2, axis=1)
        d_hi2 = np.sum((axdist + half) ** 2, axis=1)
        n_hi = proj + spread
        n_lo = proj - spread
        with np.errstate(divide="ignore", invalid="ignore"):
            ub = np.where(n_hi <= 0.0, n_hi / d_hi2, n_hi / d_lo2)
            lb = np.where(n_lo >= 0.0, n_lo / d_hi2, n_lo / d_lo2)
        ub[d_lo2 == 0.0] = np.where(n_hi[d_lo2 == 0.0] > 0.0, np.inf,
                                    ub[d_lo2 == 0.0])
        lb[d_lo2 == 0.0] = np.where(n_lo[d_lo2 == 0.0] < 0.0, -np.inf,
                                    lb[d_lo2 == 0.0])

        for c in np.argsort(-ub):
            if ub[c] <= best_hi:
                break
            if c != cell_of[v]:
                _scan(c)
        for c in np.argsort(lb):
            if lb[c] >= best_lo:
                break
            if c != cell_of[v]:
                _scan(c)
        z_max[v], z_min[v] = best_hi, best_lo
        arg_max[v], arg_min[v] = a_hi, a_lo
    return z_max, z_min, arg_max, arg_min
