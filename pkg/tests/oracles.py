"""Slow, independent reference implementations used to check the fast paths.

Everything here is written as plain loops / dense matrices on purpose: the
production code must agree with these, not the other way around.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def brute_force_nn(points):
    n = len(points)
    out = np.empty(n)
    for i in range(n):
        d = np.linalg.norm(points - points[i], axis=1)
        d[i] = np.inf
        out[i] = d.min()
    return out


def brute_force_knn_rows(points, centers, g):
    rows = []
    n = len(points)
    for c in centers:
        order = sorted(range(n), key=lambda j: (np.linalg.norm(points[j] - points[c]), j))
        row = order[: min(g, n)]
        while len(row) < g:
            row.append(row[0])
        rows.append(row)
    return np.array(rows)


def fps_reference_step(points, selected):
    """Index the greedy rule would pick next (first argmax of min distance)."""
    dmin = np.full(len(points), np.inf)
    for s in selected:
        dmin = np.minimum(dmin, np.linalg.norm(points - points[s], axis=1))
    return int(np.argmax(dmin))


def cell_centers(config):
    da = TWO_PI / config.n_azimuth
    db = np.pi / config.n_polar
    alpha = (np.arange(config.n_azimuth) + 0.5) * da
    beta = (np.arange(config.n_polar) + 0.5) * db
    return alpha, beta


def dense_shadow_map(points, nn_dist, camera, config):
    """Per-cell gather oracle: min r over points whose footprint covers the cell.

    A point's footprint is every cell whose center direction lies within
    angular distance atan(nn / r) of the point direction, plus the point's own
    cell. Computed as a dense (points x cells) membership matrix.
    """
    n_az, n_pol = config.n_azimuth, config.n_polar
    da, db = TWO_PI / n_az, np.pi / n_pol
    alpha, beta = cell_centers(config)
    d = points - camera
    r = np.linalg.norm(d, axis=1)
    grid = np.full((n_pol, n_az), config.empty_value)
    for k in range(len(points)):
        if r[k] == 0 or r[k] > config.range:
            continue
        az = np.arctan2(d[k, 1], d[k, 0]) % TWO_PI
        pol = np.arccos(np.clip(d[k, 2] / r[k], -1.0, 1.0))
        theta = np.arctan(nn_dist[k] / r[k])
        cos_sep = (
            np.cos(beta)[:, None] * np.cos(pol)
            + np.sin(beta)[:, None] * np.sin(pol) * np.cos(alpha[None, :] - az)
        )
        member = np.arccos(np.clip(cos_sep, -1, 1)) <= theta
        ai = min(int(az / da), n_az - 1)
        bi = min(int(pol / db), n_pol - 1)
        member[bi, ai] = True
        grid[member] = np.minimum(grid[member], r[k])
    return grid


def angular_occlusion_visible(points, nn_dist, camera, config, chunk=512):
    """Cell-free visibility oracle: q is blocked iff some point p sits within
    p's angular splat radius of q's direction and is nearer by more than the
    compensation."""
    d = points - camera
    r = np.linalg.norm(d, axis=1)
    u = d / np.maximum(r[:, None], 1e-300)
    theta = np.arctan(nn_dist / np.maximum(r, 1e-300))
    n = len(points)
    blocked = np.zeros(n, bool)
    margin = np.full(n, np.inf)
    for i0 in range(0, n, chunk):
        sl = slice(i0, min(n, i0 + chunk))
        sep = np.arccos(np.clip(u[sl] @ u.T, -1.0, 1.0))
        relevant = r[None, :] < r[sl][:, None] - config.compensation
        blocked[sl] = ((sep <= theta[None, :]) & relevant).any(axis=1)
        margin[sl] = np.where(relevant, np.abs(sep - theta[None, :]), np.inf).min(axis=1)
    visible = (r <= config.range) & ~blocked
    return visible, margin
