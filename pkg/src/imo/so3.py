"""Rotation-group math on 3x3 matrices.

Rotations follow the world-from-body convention R^w_b. Errors live in the
tangent space as axis-angle vectors, composed on the left:
R' = exp(theta) @ R.
"""

import numpy as np

# Below this angle Rodrigues / log coefficients switch to Taylor series.
SMALL_ANGLE = 1e-8

# Orthogonality drift above this triggers renormalization.
ORTHO_TOL = 1e-9


def hat(v):
    """Skew-symmetric matrix such that hat(v) @ w = cross(v, w)."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def exp(theta):
    """Exponential map: axis-angle vector to rotation matrix (Rodrigues)."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("exp: non-finite rotation vector")
    angle = np.linalg.norm(theta)
    K = hat(theta)
    if angle < SMALL_ANGLE:
        # 2nd-order series; exact enough below the switch point
        return np.eye(3) + K + 0.5 * (K @ K)
    s = np.sin(angle) / angle
    c = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + s * K + c * (K @ K)


def log(R):
    """Logarithm map: rotation matrix to principal axis-angle, norm <= pi."""
    R = np.asarray(R, dtype=float)
    w = np.array([R[2, 1] - R[1, 2],
                  R[0, 2] - R[2, 0],
                  R[1, 0] - R[0, 1]])
    s = 0.5 * np.linalg.norm(w)          # sin(angle), well conditioned
    c = np.clip((np.trace(R) - 1.0) * 0.5, -1.0, 1.0)
    angle = np.arctan2(s, c)
    if angle < SMALL_ANGLE:
        # R ~ I + hat(theta); antisymmetric part recovers theta
        return 0.5 * w
    if np.pi - angle < 1e-3:
        # Near pi the antisymmetric part degenerates. The symmetric part is
        # (1+c) I + (1-c) a a^T; its dominant column gives the axis to
        # machine precision, the antisymmetric part only fixes the sign.
        M = 0.5 * (R + R.T) - c * np.eye(3)
        col = int(np.argmax(np.diag(M)))
        axis = M[:, col] / np.linalg.norm(M[:, col])
        if np.dot(axis, w) < 0:
            axis = -axis
        return axis * angle
    return w * (angle / (2.0 * s))


def left_jacobian(theta):
    """Left Jacobian of the exponential map: d Log(Exp(theta+d) Exp(-theta))."""
    theta = np.asarray(theta, dtype=float)
    angle = np.linalg.norm(theta)
    K = hat(theta)
    if angle < SMALL_ANGLE:
        return np.eye(3) + 0.5 * K + (K @ K) / 6.0
    a2 = angle * angle
    c1 = (1.0 - np.cos(angle)) / a2
    c2 = (angle - np.sin(angle)) / (a2 * angle)
    return np.eye(3) + c1 * K + c2 * (K @ K)


def right_jacobian(theta):
    """Right Jacobian of the exponential map; transpose of the left one."""
    return left_jacobian(np.asarray(theta, dtype=float)).T


def ortho_error(R):
    """Max-abs deviation of R @ R.T from the identity."""
    return float(np.max(np.abs(R @ R.T - np.eye(3))))


def renormalize(R):
    """Project onto SO(3) via polar decomposition (closest rotation)."""
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    if np.linalg.det(out) < 0:
        out = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return out


def boxplus(x, delta):
    """Manifold addition: Exp(delta) @ R for rotations, x + delta otherwise."""
    x = np.asarray(x, dtype=float)
    if x.shape == (3, 3):
        return exp(delta) @ x
    return x + np.asarray(delta, dtype=float)


def boxminus(a, b):
    """Manifold difference, inverse of boxplus: Log(A @ B^-1) or a - b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape == (3, 3):
        return log(a @ b.T)
    return a - b
