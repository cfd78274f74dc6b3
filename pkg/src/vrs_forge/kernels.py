"""Numeric hot paths shared by geometry, ephemeris, solver, atmosphere and codec.

Every function here is compiled with numba unless ``VRS_FORGE_DISABLE_JIT``
is set, in which case it runs as ordinary Python over numpy arrays.
Kernels signal failure through status codes; callers raise.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit

# Layout of the orbital parameter vector consumed by ``orbit_state``.
P_SQRT_A = 0
P_E = 1
P_I0 = 2
P_OMEGA0 = 3
P_OMEGA = 4
P_M0 = 5
P_DELTA_N = 6
P_IDOT = 7
P_OMEGA_DOT = 8
P_CUC = 9
P_CUS = 10
P_CIC = 11
P_CIS = 12
P_CRC = 13
P_CRS = 14
P_TOE = 15
N_ORBIT_PARAMS = 16

SOLVE_OK = 0
SOLVE_MAX_ITER = 1
SOLVE_DEGENERATE = 2
SOLVE_KEPLER = 3

GEO_TILT = -5.0 * math.pi / 180.0


@njit
def sagnac_range(rx, sat, omega_over_c):
    dx = rx[0] - sat[0]
    dy = rx[1] - sat[1]
    dz = rx[2] - sat[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz) + omega_over_c * (sat[0] * rx[1] - rx[0] * sat[1])


@njit
def sagnac_range_many(rx, sat, omega_over_c):
    n = rx.shape[0]
    out = np.empty(n)
    for k in range(n):
        out[k] = sagnac_range(rx[k], sat[k], omega_over_c)
    return out


@njit
def kepler(mean_anomaly, ecc):
    """Eccentric anomaly by Newton from E = M, bisection if Newton misbehaves.

    Returns NaN when neither converges.
    """
    ecc_anom = mean_anomaly
    last = math.inf
    for _ in range(30):
        f = ecc_anom - ecc * math.sin(ecc_anom) - mean_anomaly
        if abs(f) <= 1e-15 * max(1.0, abs(mean_anomaly)):
            return ecc_anom
        if abs(f) > last:
            break
        last = abs(f)
        ecc_anom -= f / (1.0 - ecc * math.cos(ecc_anom))
    f = ecc_anom - ecc * math.sin(ecc_anom) - mean_anomaly
    if abs(f) <= 1e-13 and math.isfinite(ecc_anom):
        return ecc_anom
    # f(E) is monotone and brackets its root in [M - e, M + e].
    lo = mean_anomaly - ecc - 1e-12
    hi = mean_anomaly + ecc + 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = mid - ecc * math.sin(mid) - mean_anomaly
        if f > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4e-16 * max(1.0, abs(mid)):
            break
    mid = 0.5 * (lo + hi)
    if abs(mid - ecc * math.sin(mid) - mean_anomaly) <= 1e-13:
        return mid
    return math.nan


@njit
def eccentric_anomaly(params, tk, mu):
    a = params[P_SQRT_A] * params[P_SQRT_A]
    n = math.sqrt(mu / (a * a * a)) + params[P_DELTA_N]
    return kepler(params[P_M0] + n * tk, params[P_E])


@njit
def orbit_state(params, tk, mu, omega_e, geo):
    """ECEF position and velocity at ``tk`` seconds from toe.

    ``geo`` selects the BeiDou GEO transformation.  Returns
    (pos, vel, eccentric_anomaly); pos holds NaN if Kepler failed.
    """
    sqrt_a = params[P_SQRT_A]
    ecc = params[P_E]
    a = sqrt_a * sqrt_a
    n = math.sqrt(mu / (a * a * a)) + params[P_DELTA_N]
    ek = kepler(params[P_M0] + n * tk, ecc)
    pos = np.empty(3)
    vel = np.empty(3)
    if not math.isfinite(ek):
        pos[:] = math.nan
        vel[:] = math.nan
        return pos, vel, ek

    sin_e = math.sin(ek)
    cos_e = math.cos(ek)
    one_minus = 1.0 - ecc * cos_e
    root = math.sqrt(1.0 - ecc * ecc)
    nu = math.atan2(root * sin_e, cos_e - ecc)
    phi = nu + params[P_OMEGA]
    s2 = math.sin(2.0 * phi)
    c2 = math.cos(2.0 * phi)
    u = phi + params[P_CUS] * s2 + params[P_CUC] * c2
    r = a * one_minus + params[P_CRS] * s2 + params[P_CRC] * c2
    inc = params[P_I0] + params[P_IDOT] * tk + params[P_CIS] * s2 + params[P_CIC] * c2

    e_dot = n / one_minus
    phi_dot = root * e_dot / one_minus
    u_dot = phi_dot * (1.0 + 2.0 * (params[P_CUS] * c2 - params[P_CUC] * s2))
    r_dot = a * ecc * sin_e * e_dot + 2.0 * phi_dot * (params[P_CRS] * c2 - params[P_CRC] * s2)
    i_dot = params[P_IDOT] + 2.0 * phi_dot * (params[P_CIS] * c2 - params[P_CIC] * s2)

    if geo:
        node_rate = params[P_OMEGA_DOT]
    else:
        node_rate = params[P_OMEGA_DOT] - omega_e
    node = params[P_OMEGA0] + node_rate * tk - omega_e * params[P_TOE]

    xp = r * math.cos(u)
    yp = r * math.sin(u)
    xp_dot = r_dot * math.cos(u) - r * u_dot * math.sin(u)
    yp_dot = r_dot * math.sin(u) + r * u_dot * math.cos(u)

    cn = math.cos(node)
    sn = math.sin(node)
    ci = math.cos(inc)
    si = math.sin(inc)
    x = xp * cn - yp * ci * sn
    y = xp * sn + yp * ci * cn
    z = yp * si
    vx = xp_dot * cn - yp_dot * ci * sn + yp * si * sn * i_dot - y * node_rate
    vy = xp_dot * sn + yp_dot * ci * cn - yp * si * cn * i_dot + x * node_rate
    vz = yp_dot * si + yp * ci * i_dot

    if not geo:
        pos[0] = x
        pos[1] = y
        pos[2] = z
        vel[0] = vx
        vel[1] = vy
        vel[2] = vz
        return pos, vel, ek

    # P = Rz(omega_e tk) Rx(-5 deg) P_gk
    ct = math.cos(GEO_TILT)
    st = math.sin(GEO_TILT)
    gx = x
    gy = ct * y + st * z
    gz = -st * y + ct * z
    gvx = vx
    gvy = ct * vy + st * vz
    gvz = -st * vy + ct * vz
    ang = omega_e * tk
    ca = math.cos(ang)
    sa = math.sin(ang)
    pos[0] = ca * gx + sa * gy
    pos[1] = -sa * gx + ca * gy
    pos[2] = gz
    vel[0] = ca * gvx + sa * gvy + omega_e * (-sa * gx + ca * gy)
    vel[1] = -sa * gvx + ca * gvy + omega_e * (-ca * gx - sa * gy)
    vel[2] = gvz
    return pos, vel, ek


@njit
def clock_polynomial(a0, a1, a2, dt_toc):
    return a0 + a1 * dt_toc + a2 * dt_toc * dt_toc


@njit
def clock_with_relativity(params, a0, a1, a2, dt_toc, tk, mu, f_rel):
    ek = eccentric_anomaly(params, tk, mu)
    return (
        clock_polynomial(a0, a1, a2, dt_toc)
        + f_rel * params[P_E] * params[P_SQRT_A] * math.sin(ek)
    )


@njit
def solve_transmit(
    base, tb_toe, tb_toc, params, a0, a1, a2, mu, omega_e, geo, f_rel,
    c, omega_ie, tol, max_iter,
):
    """Newton iteration on the propagation time for one broadcast satellite.

    ``tb_toe`` and ``tb_toc`` are the base epoch minus toe and toc in seconds.
    Returns (t_p, dt, pos, vel, iterations, residual, status); the state and
    residual are evaluated at the returned t_p.
    """
    omega_over_c = omega_ie / c
    t_p = 0.067
    prev = 0.0
    iters = 0
    status = SOLVE_OK
    while abs(prev - t_p) > tol:
        if iters >= max_iter:
            status = SOLVE_MAX_ITER
            break
        dt_c = tb_toc - t_p
        dt = clock_with_relativity(params, a0, a1, a2, dt_c, tb_toe - t_p, mu, f_rel)
        pos, vel, ek = orbit_state(params, tb_toe - t_p - dt, mu, omega_e, geo)
        if not math.isfinite(ek):
            status = SOLVE_KEPLER
            break
        rng = sagnac_range(base, pos, omega_over_c)
        f = rng - c * (t_p + dt)
        los = (pos - base) / math.sqrt(
            (pos[0] - base[0]) ** 2 + (pos[1] - base[1]) ** 2 + (pos[2] - base[2]) ** 2
        )
        drift = a1 + 2.0 * a2 * dt_c
        df = -(los[0] * vel[0] + los[1] * vel[1] + los[2] * vel[2] + c) * (1.0 - drift)
        iters += 1
        if abs(df) < 1e-3:
            status = SOLVE_DEGENERATE
            break
        prev = t_p
        t_p = t_p - f / df

    dt = clock_with_relativity(params, a0, a1, a2, tb_toc - t_p, tb_toe - t_p, mu, f_rel)
    pos, vel, ek = orbit_state(params, tb_toe - t_p - dt, mu, omega_e, geo)
    if not math.isfinite(ek) and status == SOLVE_OK:
        status = SOLVE_KEPLER
    residual = sagnac_range(base, pos, omega_over_c) - c * (t_p + dt)
    return t_p, dt, pos, vel, iters, residual, status


@njit
def legendre_table(nmax, x):
    """Fully normalized associated Legendre functions P[n, m], no Condon-Shortley phase.

    Normalization: sqrt((2 - delta_m0)(2n + 1)(n - m)!/(n + m)!).
    """
    p = np.zeros((nmax + 1, nmax + 1))
    cos_t = math.sqrt(max(0.0, 1.0 - x * x))
    p[0, 0] = 1.0
    for m in range(1, nmax + 1):
        if m == 1:
            p[1, 1] = math.sqrt(3.0) * cos_t
        else:
            p[m, m] = math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * cos_t * p[m - 1, m - 1]
    for m in range(0, nmax):
        p[m + 1, m] = math.sqrt(2.0 * m + 3.0) * x * p[m, m]
    for m in range(0, nmax + 1):
        for n in range(m + 2, nmax + 1):
            a = math.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = math.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            p[n, m] = a * (x * p[n - 1, m] - b * p[n - 2, m])
    return p


@njit
def sh_sum(p, cos_ms, sin_ms, c_coef, s_coef, nmax, mmax):
    total = 0.0
    for n in range(nmax + 1):
        for m in range(min(n, mmax) + 1):
            total += p[n, m] * (c_coef[n, m] * cos_ms[m] + s_coef[n, m] * sin_ms[m])
    return total


def _crc24q_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint32)
    for i in range(256):
        crc = i << 16
        for _ in range(8):
            crc <<= 1
            if crc & 0x1000000:
                crc ^= 0x1864CFB
        table[i] = crc & 0xFFFFFF
    return table


CRC24Q_TABLE = _crc24q_table()


@njit
def crc24q_kernel(data, table):
    crc = 0
    for i in range(data.shape[0]):
        crc = ((crc << 8) & 0xFFFFFF) ^ table[((crc >> 16) ^ data[i]) & 0xFF]
    return crc
