#!/usr/bin/env python3
"""Builds data/three_machine.json, the shipped 3-machine reduced-network case.

Network: three generator internal nodes behind x'd, three terminal buses, one
load bus. Generator 1 feeds the load bus over three parallel circuits; the
contingency trips one of them. Two shunt conductance trims are added to the
post-contingency network so that (a) total electrical power is unchanged at
the instant of switching and (b) a post-contingency equilibrium exists at
synchronous speed. Without the trims the frequency drifts several rad/s
(the model has no governor) and the "largest state change" that scales the
process noise would be dominated by that drift.

Requires numpy and scipy. The C++ test suite re-checks the equilibrium
residual of the written file.
"""
import json
import sys

import numpy as np
from scipy.optimize import least_squares

OMEGA_S = 2.0 * np.pi * 60.0

MACHINES = [
    dict(h=6.5, d=8.0, xd=0.60, xq=0.79, xdp=0.30, xqp=0.55, td0p=6.0, tq0p=0.5),
    dict(h=5.0, d=8.0, xd=0.60, xq=0.79, xdp=0.30, xqp=0.55, td0p=5.5, tq0p=0.5),
    dict(h=4.0, d=8.0, xd=0.55, xq=0.69, xdp=0.25, xqp=0.45, td0p=5.0, tq0p=0.6),
]
DELTA0 = np.array([1.10, 0.80, 0.75])
EQP0 = np.array([1.10, 1.05, 1.00])


def reduced_admittance(trip, g_load=0.0, g_term=0.0):
    n_bus = 7  # 0..2 internal, 3..5 terminal, 6 load
    y = np.zeros((n_bus, n_bus), complex)

    def branch(a, b, z, scale=1.0):
        yy = scale / z
        y[a, a] += yy
        y[b, b] += yy
        y[a, b] -= yy
        y[b, a] -= yy

    for i, mc in enumerate(MACHINES):
        branch(i, 3 + i, 1j * mc["xdp"])
    branch(3, 6, 0.02 + 0.3j)
    branch(3, 6, 0.02 + 0.3j)
    branch(3, 6, 0.02 + 0.3j, 1.0 - trip)
    branch(4, 6, 0.012 + 0.12j)
    branch(5, 6, 0.015 + 0.15j)
    branch(4, 5, 0.02 + 0.25j)
    y[6, 6] += 2.2 - 0.7j + g_load
    y[3, 3] += 0.2 - 0.05j + g_term
    y[4, 4] += 0.25 - 0.08j
    y[5, 5] += 0.2 - 0.05j
    yaa, yab, yba, ybb = y[:3, :3], y[:3, 3:], y[3:, :3], y[3:, 3:]
    return yaa - yab @ np.linalg.solve(ybb, yba)


def currents(x, ymat):
    d, eq, ed = x[0::4], x[2::4], x[3::4]
    psi = (ed * np.sin(d) + eq * np.cos(d)) + 1j * (eq * np.sin(d) - ed * np.cos(d))
    cur = ymat @ psi
    i_r, i_i = cur.real, cur.imag
    return i_r * np.sin(d) - i_i * np.cos(d), i_r * np.cos(d) + i_i * np.sin(d)


def deriv(x, u, ymat):
    i_d, i_q = currents(x, ymat)
    dx = np.zeros_like(x)
    for i, mc in enumerate(MACHINES):
        d, w, eq, ed = x[4 * i:4 * i + 4]
        te = ed * i_d[i] + eq * i_q[i] + (mc["xqp"] - mc["xdp"]) * i_d[i] * i_q[i]
        dx[4 * i] = w - OMEGA_S
        dx[4 * i + 1] = OMEGA_S / (2 * mc["h"]) * (u[2 * i] - te - mc["d"] / OMEGA_S * (w - OMEGA_S))
        dx[4 * i + 2] = (u[2 * i + 1] - eq - (mc["xd"] - mc["xdp"]) * i_d[i]) / mc["td0p"]
        dx[4 * i + 3] = (-ed + (mc["xq"] - mc["xqp"]) * i_q[i]) / mc["tq0p"]
    return dx


def pre_fault_equilibrium(ymat):
    x = np.zeros(12)
    x[0::4], x[1::4], x[2::4] = DELTA0, OMEGA_S, EQP0
    gain = np.array([mc["xq"] - mc["xqp"] for mc in MACHINES])
    # e'_d = (x_q - x'_q) i_q is affine in e'_d for fixed (delta, e'_q): Newton converges in one step.
    for _ in range(5):
        r = x[3::4] - gain * currents(x, ymat)[1]
        jac = np.zeros((3, 3))
        for j in range(3):
            xp = x.copy()
            xp[4 * j + 3] += 1e-7
            jac[:, j] = (xp[3::4] - gain * currents(xp, ymat)[1] - r) / 1e-7
        x[3::4] -= np.linalg.solve(jac, r)
    i_d, i_q = currents(x, ymat)
    u = np.zeros(6)
    for i, mc in enumerate(MACHINES):
        eq, ed = x[4 * i + 2], x[4 * i + 3]
        u[2 * i] = ed * i_d[i] + eq * i_q[i] + (mc["xqp"] - mc["xdp"]) * i_d[i] * i_q[i]
        u[2 * i + 1] = eq + (mc["xd"] - mc["xdp"]) * i_d[i]
    return x, u


def main(out_path):
    y_pre = reduced_admittance(0.0)
    x0, u0 = pre_fault_equilibrium(y_pre)
    h = np.array([mc["h"] for mc in MACHINES])

    def residual(z, trip):
        x = x0.copy()
        x[4], x[8] = x0[0] + z[0], x[0] + z[1]
        x[2::4], x[3::4] = z[2:5], z[5:8]
        ymat = reduced_admittance(trip, z[8], z[9])
        d_eq = deriv(x, u0, ymat)
        d_switch = deriv(x0, u0, ymat)
        return np.concatenate([d_eq[1::4] / 10, d_eq[2::4], d_eq[3::4], [np.sum(h * d_switch[1::4]) / 10]])

    z = np.concatenate([[x0[4] - x0[0], x0[8] - x0[0]], x0[2::4], x0[3::4], [0.0, 0.0]])
    for trip in np.linspace(0.0, 1.0, 11)[1:]:
        z = least_squares(lambda zz: residual(zz, trip), z, xtol=1e-15, ftol=1e-15, gtol=1e-15).x
    y_post = reduced_admittance(1.0, z[8], z[9])

    def flat(ymat):
        return [[float(v.real), float(v.imag)] for v in ymat.reshape(-1)]

    doc = {
        "name": "three_machine",
        "machines": MACHINES,
        "omega_s": OMEGA_S,
        "y_pre": flat(y_pre),
        "y_post": flat(y_post),
        "u0": [float(v) for v in u0],
        "x0": [float(v) for v in x0],
    }
    with open(out_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print("equilibrium residual", np.abs(deriv(x0, u0, y_pre)).max())
    print("trim residual", np.abs(residual(z, 1.0)).max(), "trims", z[8:])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/three_machine.json")
