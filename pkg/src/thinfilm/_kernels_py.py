"""Pure-numpy reference kernels; used when the compiled core is unavailable."""
import numpy as np


def face_mobility_array(u_left, u_right, n, eps_floor):
    m = np.maximum(0.5 * (u_left + u_right), eps_floor)
    return np.maximum(m, 0.0) ** n


def tendency(u, h, n, eps_floor):
    """Conservative ``-div(M grad lap u)`` on a periodic (ny, nx) array.

    Returns ``(rhs, max_face_mobility)``.
    """
    lap = np.roll(u, -1, axis=1) - 2.0 * u + np.roll(u, 1, axis=1)
    if u.shape[0] > 1:
        lap = lap + (np.roll(u, -1, axis=0) - 2.0 * u + np.roll(u, 1, axis=0))
    lap = lap / (h * h)

    mx = face_mobility_array(u, np.roll(u, -1, axis=1), n, eps_floor)
    fx = mx * (np.roll(lap, -1, axis=1) - lap) / h
    div = (fx - np.roll(fx, 1, axis=1)) / h
    mmax = float(mx.max())
    if u.shape[0] > 1:
        my = face_mobility_array(u, np.roll(u, -1, axis=0), n, eps_floor)
        fy = my * (np.roll(lap, -1, axis=0) - lap) / h
        div = div + (fy - np.roll(fy, 1, axis=0)) / h
        mmax = max(mmax, float(my.max()))
    return -div, mmax
