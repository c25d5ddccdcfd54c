"""Compiled inner loops for the simulator.

These mirror ``vehicle.composite``/``sim.plant_terms`` and ``sim.step`` but
run a whole control tick of physics steps without returning to Python.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def quat_to_matrix(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1 - 2 * (y * y + z * z)
    R[0, 1] = 2 * (x * y - w * z)
    R[0, 2] = 2 * (x * z + w * y)
    R[1, 0] = 2 * (x * y + w * z)
    R[1, 1] = 1 - 2 * (x * x + z * z)
    R[1, 2] = 2 * (y * z - w * x)
    R[2, 0] = 2 * (x * z - w * y)
    R[2, 1] = 2 * (y * z + w * x)
    R[2, 2] = 1 - 2 * (x * x + y * y)
    return R


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def plant(e, static_mass, static_mm, static_inertia, static_vol, static_vm,
          area, mount, xs, ys, moving_mass, piston_radius, added_mass):
    """Returns (mass, com, volume, cob, M, M_inv) for extensions ``e``."""
    c = np.empty((4, 3))
    for k in range(4):
        c[k, 0] = xs[k] * (mount[0] + 0.5 * e[k])
        c[k, 1] = ys[k] * mount[1]
        c[k, 2] = mount[2]
    volume = static_vol
    vm = static_vm.copy()
    mass = static_mass + 4 * moving_mass
    mm = static_mm.copy()
    inertia = static_inertia.copy()
    r2 = piston_radius * piston_radius
    for k in range(4):
        dv = area * e[k]
        volume += dv
        for i in range(3):
            vm[i] += dv * c[k, i]
            mm[i] += moving_mass * c[k, i]
        if moving_mass > 0:
            axial = 0.5 * moving_mass * r2
            trans = moving_mass * (3 * r2 + e[k] * e[k]) / 12.0
            cc = c[k, 0] ** 2 + c[k, 1] ** 2 + c[k, 2] ** 2
            for i in range(3):
                for j in range(3):
                    inertia[i, j] -= moving_mass * c[k, i] * c[k, j]
                inertia[i, i] += moving_mass * cc
            inertia[0, 0] += axial
            inertia[1, 1] += trans
            inertia[2, 2] += trans
    cob = vm / volume
    com = mm / mass
    M = np.zeros((6, 6))
    for i in range(3):
        M[i, i] = mass
        for j in range(3):
            M[3 + i, 3 + j] = inertia[i, j]
    # m * skew(com) in the lower-left block, its negative upper-right
    M[4, 0] = mass * com[2]
    M[5, 0] = -mass * com[1]
    M[3, 1] = -mass * com[2]
    M[5, 1] = mass * com[0]
    M[3, 2] = mass * com[1]
    M[4, 2] = -mass * com[0]
    for i in range(3):
        for j in range(3):
            M[i, 3 + j] = M[3 + j, i]
    for i in range(6):
        M[i, i] += added_mass[i]
    return mass, com, volume, cob, M, np.linalg.inv(M)


@njit(cache=True)
def rigid_step(pos, q, v, w, mass, com, volume, cob, M, M_inv,
               rho, g, depth_max, current, c_lin, c_rot, dt):
    """One semi-implicit Euler step. Returns (pos, q, v, w)."""
    R = quat_to_matrix(q)
    down = R[2].copy()
    tau = np.empty(6)
    fb = rho * g * volume
    weight = g * mass * down
    buoy = -fb * down
    tq = _cross(com, weight) + _cross(cob, buoy)
    vr = v.copy()
    if current[0] != 0.0 or current[1] != 0.0 or current[2] != 0.0:
        vr = v - R.T @ current
    for i in range(3):
        tau[i] = weight[i] + buoy[i] - c_lin[i] * vr[i] * abs(vr[i])
        tau[3 + i] = tq[i] - c_rot[i] * w[i] * abs(w[i])
    nu = np.empty(6)
    nu[:3] = v
    nu[3:] = w
    p = M @ nu
    p1 = p[:3].copy()
    p2 = p[3:].copy()
    a = _cross(w, p1)
    b = _cross(w, p2) + _cross(v, p1)
    for i in range(3):
        tau[i] -= a[i]
        tau[3 + i] -= b[i]
    nu = nu + dt * (M_inv @ tau)
    v_new = nu[:3].copy()
    w_new = nu[3:].copy()
    pos_new = pos + dt * (R @ v_new)

    rx, ry, rz = w_new[0] * dt, w_new[1] * dt, w_new[2] * dt
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-12:
        dw, dx, dy, dz = 1.0, 0.5 * rx, 0.5 * ry, 0.5 * rz
    else:
        s = math.sin(0.5 * angle) / angle
        dw, dx, dy, dz = math.cos(0.5 * angle), rx * s, ry * s, rz * s
    qw, qx, qy, qz = q[0], q[1], q[2], q[3]
    q_new = np.empty(4)
    q_new[0] = qw * dw - qx * dx - qy * dy - qz * dz
    q_new[1] = qw * dx + qx * dw + qy * dz - qz * dy
    q_new[2] = qw * dy - qx * dz + qy * dw + qz * dx
    q_new[3] = qw * dz + qx * dy - qy * dx + qz * dw
    q_new /= math.sqrt(q_new[0] ** 2 + q_new[1] ** 2 + q_new[2] ** 2 + q_new[3] ** 2)

    depth = pos_new[2]
    if depth < 0.0 or depth > depth_max:
        pos_new[2] = min(max(depth, 0.0), depth_max)
        Rn = quat_to_matrix(q_new)
        v_in = Rn @ v_new
        v_in[2] = 0.0
        v_new = Rn.T @ v_in
    return pos_new, q_new, v_new, w_new


@njit(cache=True)
def slew(ext, cmd, max_move, deadband):
    out = ext.copy()
    changed = False
    for k in range(4):
        d = cmd[k] - ext[k]
        if d == 0.0:
            continue
        if abs(d) <= deadband or abs(d) <= max_move:
            out[k] = cmd[k]
        elif d > 0:
            out[k] = ext[k] + max_move
        else:
            out[k] = ext[k] - max_move
        changed = True
    return out, changed


@njit(cache=True)
def advance(n, pos, q, v, w, ext, cmd, max_speed, deadband,
            static_mass, static_mm, static_inertia, static_vol, static_vm,
            area, mount, xs, ys, moving_mass, piston_radius, added_mass,
            rho, g, depth_max, current, c_lin, c_rot, dt):
    """Run ``n`` physics steps with the pistons slewing toward ``cmd``.

    Returns (pos, q, v, w, ext, travel, fault) where ``fault`` is the index
    of the first non-finite step or -1.
    """
    mass, com, volume, cob, M, M_inv = plant(
        ext, static_mass, static_mm, static_inertia, static_vol, static_vm,
        area, mount, xs, ys, moving_mass, piston_radius, added_mass)
    travel = 0.0
    max_move = max_speed * dt
    for k in range(n):
        new_ext, changed = slew(ext, cmd, max_move, deadband)
        if changed:
            for i in range(4):
                travel += abs(new_ext[i] - ext[i])
            ext = new_ext
            mass, com, volume, cob, M, M_inv = plant(
                ext, static_mass, static_mm, static_inertia, static_vol, static_vm,
                area, mount, xs, ys, moving_mass, piston_radius, added_mass)
        pos, q, v, w = rigid_step(pos, q, v, w, mass, com, volume, cob, M, M_inv,
                                  rho, g, depth_max, current, c_lin, c_rot, dt)
        for i in range(3):
            if not (math.isfinite(pos[i]) and math.isfinite(v[i]) and math.isfinite(w[i])):
                return pos, q, v, w, ext, travel, k
        if not math.isfinite(q[0]):
            return pos, q, v, w, ext, travel, k
    return pos, q, v, w, ext, travel, -1
