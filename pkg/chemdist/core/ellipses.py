"""
Ellipses - vectorized overlap predicate for planar ellipses

Ellipses are given as (center, semi-major a, semi-minor b, orientation theta). Two closed
ellipses intersect iff the maximum over s in [0, 1] of the contact function

    F(s) = s (1 - s) r^T [(1 - s) S1 + s S2]^-1 r,   S = R diag(a^2, b^2) R^T,  r = c2 - c1

is at most 1. F is concave on [0, 1], so a golden-section search finds the maximum.
"""
import math

import numpy as np

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
GOLDEN_ITERATIONS = 80
CONTACT_TOLERANCE = 1e-12


def shape_matrices(a: np.ndarray, b: np.ndarray, theta: np.ndarray):
    """Entries (sxx, sxy, syy) of R diag(a^2, b^2) R^T."""
    a2 = np.asarray(a, dtype=float) ** 2
    b2 = np.asarray(b, dtype=float) ** 2
    c = np.cos(theta)
    s = np.sin(theta)
    sxx = a2 * c * c + b2 * s * s
    syy = a2 * s * s + b2 * c * c
    sxy = (a2 - b2) * s * c
    return sxx, sxy, syy


def contact_function(s, r, shape_1, shape_2):
    """F(s) for arrays of ellipse pairs; `r` has shape (k, 2)."""
    xx = (1.0 - s) * shape_1[0] + s * shape_2[0]
    xy = (1.0 - s) * shape_1[1] + s * shape_2[1]
    yy = (1.0 - s) * shape_1[2] + s * shape_2[2]
    det = xx * yy - xy * xy
    rx, ry = r[:, 0], r[:, 1]
    quad_form = (yy * rx * rx - 2.0 * xy * rx * ry + xx * ry * ry) / det
    return s * (1.0 - s) * quad_form


def max_contact(centers_1, axes_1, theta_1, centers_2, axes_2, theta_2) -> np.ndarray:
    """Maximum of the contact function per pair; axes are (k, 2) arrays of (a, b)."""
    centers_1 = np.atleast_2d(np.asarray(centers_1, dtype=float))
    centers_2 = np.atleast_2d(np.asarray(centers_2, dtype=float))
    axes_1 = np.atleast_2d(np.asarray(axes_1, dtype=float))
    axes_2 = np.atleast_2d(np.asarray(axes_2, dtype=float))
    r = centers_2 - centers_1
    shape_1 = shape_matrices(axes_1[:, 0], axes_1[:, 1], np.asarray(theta_1, dtype=float))
    shape_2 = shape_matrices(axes_2[:, 0], axes_2[:, 1], np.asarray(theta_2, dtype=float))

    lo = np.zeros(len(r))
    hi = np.ones(len(r))
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1 = contact_function(x1, r, shape_1, shape_2)
    f2 = contact_function(x2, r, shape_1, shape_2)
    for _ in range(GOLDEN_ITERATIONS):
        left = f1 < f2
        # maximum lies in [x1, hi] where f1 < f2, else in [lo, x2]
        lo = np.where(left, x1, lo)
        hi = np.where(left, hi, x2)
        new_x1 = np.where(left, x2, hi - _INV_PHI * (hi - lo))
        new_x2 = np.where(left, lo + _INV_PHI * (hi - lo), x1)
        new_f1 = np.where(left, f2, np.nan)
        new_f2 = np.where(left, np.nan, f1)
        recompute_1 = ~left
        recompute_2 = left
        if recompute_1.any():
            new_f1[recompute_1] = contact_function(
                new_x1[recompute_1], r[recompute_1],
                tuple(m[recompute_1] for m in shape_1), tuple(m[recompute_1] for m in shape_2),
            )
        if recompute_2.any():
            new_f2[recompute_2] = contact_function(
                new_x2[recompute_2], r[recompute_2],
                tuple(m[recompute_2] for m in shape_1), tuple(m[recompute_2] for m in shape_2),
            )
        x1, x2, f1, f2 = new_x1, new_x2, new_f1, new_f2
    return np.maximum(f1, f2)


def ellipses_overlap(centers_1, axes_1, theta_1, centers_2, axes_2, theta_2) -> np.ndarray:
    """
    Closed-ellipse intersection test for k pairs.

    Returns:
        Boolean array of shape (k,); touching ellipses count as intersecting
    """
    centers_1 = np.atleast_2d(np.asarray(centers_1, dtype=float))
    centers_2 = np.atleast_2d(np.asarray(centers_2, dtype=float))
    axes_1 = np.atleast_2d(np.asarray(axes_1, dtype=float))
    axes_2 = np.atleast_2d(np.asarray(axes_2, dtype=float))
    theta_1 = np.broadcast_to(np.asarray(theta_1, dtype=float), (len(centers_1),))
    theta_2 = np.broadcast_to(np.asarray(theta_2, dtype=float), (len(centers_2),))
    result = np.zeros(len(centers_1), dtype=bool)
    if len(result) == 0:
        return result

    dist = np.linalg.norm(centers_2 - centers_1, axis=1)
    reach = axes_1[:, 0] + axes_2[:, 0]
    # bounding circles of radius a
    candidate = dist <= reach
    # inscribed circles of radius b
    result |= dist <= axes_1[:, 1] + axes_2[:, 1]
    pending = candidate & ~result
    if pending.any():
        f = max_contact(
            centers_1[pending], axes_1[pending], theta_1[pending],
            centers_2[pending], axes_2[pending], theta_2[pending],
        )
        result[pending] = f <= 1.0 + CONTACT_TOLERANCE
    return result


def point_in_ellipse(points, center, a: float, b: float, theta: float) -> np.ndarray:
    """Membership of points in one closed ellipse."""
    d = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    along = d[:, 0] * c + d[:, 1] * s
    across = -d[:, 0] * s + d[:, 1] * c
    return (along / a) ** 2 + (across / b) ** 2 <= 1.0
