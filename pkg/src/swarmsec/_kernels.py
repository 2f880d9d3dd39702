"""Sphere-integral kernels for the array power pattern.

Both paths evaluate a midpoint rule for

    integral over the sphere of |sum_k w_k exp(j c_p d_k . u(theta, phi))|^2 sin(theta)

where ``w_k = I_k exp(j Psi_k)`` already carries the steering phase.  The
integrand is sampled at cell midpoints; each cell is weighted by its exact
solid angle (cos theta_lo - cos theta_hi) * d_phi rather than by
sin(theta_mid) * d_theta * d_phi, so a constant pattern integrates to 4 pi
exactly.  The numba path loops point by point and needs O(K) memory; the
numpy path vectorises over blocks of theta rows.
"""
import numpy as np

from ._accel import NUMBA_ENABLED, njit

# upper bound on K * rows * n_phi complex entries held at once by the numpy path
_BLOCK_ENTRIES = 1 << 21


def midpoint_nodes(n_theta, n_phi):
    """Cell-centre angles and the solid angle of each cell in a theta row."""
    d_theta = np.pi / n_theta
    d_phi = 2.0 * np.pi / n_phi
    theta = (np.arange(n_theta) + 0.5) * d_theta
    phi = (np.arange(n_phi) + 0.5) * d_phi
    return theta, phi, row_weights(n_theta) * d_phi


def row_weights(n_theta):
    edges = np.cos(np.arange(n_theta + 1) * (np.pi / n_theta))
    return edges[:-1] - edges[1:]


def sphere_power_numpy(offsets, w_re, w_im, cp, n_theta, n_phi):
    theta, phi, cell = midpoint_nodes(n_theta, n_phi)
    offsets = np.asarray(offsets, dtype=np.float64)
    w = np.asarray(w_re, dtype=np.float64) + 1j * np.asarray(w_im, dtype=np.float64)
    k = offsets.shape[0]
    cphi, sphi = np.cos(phi), np.sin(phi)
    # horizontal projection d_k . (cos phi, sin phi), shape (K, n_phi)
    horiz = offsets[:, 0:1] * cphi[None, :] + offsets[:, 1:2] * sphi[None, :]
    rows = max(1, _BLOCK_ENTRIES // max(1, k * n_phi))
    total = 0.0
    for start in range(0, n_theta, rows):
        th = theta[start:start + rows]
        wt = cell[start:start + rows]
        st, ct = np.sin(th), np.cos(th)
        phase = cp * (horiz[:, None, :] * st[None, :, None]
                      + offsets[:, 2][:, None, None] * ct[None, :, None])
        af = np.einsum("k,ktp->tp", w, np.exp(1j * phase))
        power = af.real ** 2 + af.imag ** 2
        total += float(np.sum(power.sum(axis=1) * wt))
    return total


@njit
def _sphere_power_loops(offsets, w_re, w_im, cp, n_theta, n_phi):
    d_theta = np.pi / n_theta
    d_phi = 2.0 * np.pi / n_phi
    k = offsets.shape[0]
    cphi = np.empty(n_phi)
    sphi = np.empty(n_phi)
    for j in range(n_phi):
        ph = (j + 0.5) * d_phi
        cphi[j] = np.cos(ph)
        sphi[j] = np.sin(ph)
    total = 0.0
    for i in range(n_theta):
        th = (i + 0.5) * d_theta
        st = np.sin(th)
        ct = np.cos(th)
        row = 0.0
        for j in range(n_phi):
            re = 0.0
            im = 0.0
            for m in range(k):
                arg = cp * ((offsets[m, 0] * cphi[j] + offsets[m, 1] * sphi[j]) * st
                            + offsets[m, 2] * ct)
                c = np.cos(arg)
                s = np.sin(arg)
                re += w_re[m] * c - w_im[m] * s
                im += w_re[m] * s + w_im[m] * c
            row += re * re + im * im
        total += row * (np.cos(i * d_theta) - np.cos((i + 1) * d_theta))
    return total * d_phi


def sphere_power_numba(offsets, w_re, w_im, cp, n_theta, n_phi):
    return float(_sphere_power_loops(np.ascontiguousarray(offsets, dtype=np.float64),
                                     np.ascontiguousarray(w_re, dtype=np.float64),
                                     np.ascontiguousarray(w_im, dtype=np.float64),
                                     float(cp), int(n_theta), int(n_phi)))


def sphere_power(offsets, w_re, w_im, cp, n_theta, n_phi):
    if NUMBA_ENABLED:
        return sphere_power_numba(offsets, w_re, w_im, cp, n_theta, n_phi)
    return sphere_power_numpy(offsets, w_re, w_im, cp, n_theta, n_phi)
