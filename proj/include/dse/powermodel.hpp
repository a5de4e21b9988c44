#pragma once

// Two-axis (4th-order) multi-machine generator model behind a reduced
// admittance matrix.
//
// State per machine i, flattened as x[4i..4i+3] = (delta, omega, e'q, e'd),
// omega in rad/s. Inputs u[2i..2i+1] = (Tm, Efd). Measurements are packed
// channel-major: all eR, then all eI, then all iR, then all iI.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "dse/types.hpp"

namespace dse {

struct MachineParams {
    double h = 0.0;     // inertia constant, s
    double d = 0.0;     // damping, pu
    double xd = 0.0;
    double xq = 0.0;
    double xdp = 0.0;   // x'_d
    double xqp = 0.0;   // x'_q
    double td0p = 0.0;  // T'_d0, s
    double tq0p = 0.0;  // T'_q0, s

    void validate() const;
};

struct SystemCase {
    std::vector<MachineParams> machines;
    CMat y_pre;
    CMat y_post;
    double omega_s = 2.0 * std::numbers::pi * 60.0;
    Vec u0;
    Vec x0;

    int m() const { return static_cast<int>(machines.size()); }
    int n() const { return 4 * m(); }
    int p() const { return 4 * m(); }

    // Dimensions and parameter ranges only.
    void validate_structure() const;
    // validate_structure() plus the pre-fault equilibrium residual check.
    void validate(double equilibrium_tol = 1e-6) const;
};

namespace idx {
inline int delta(int i) { return 4 * i; }
inline int omega(int i) { return 4 * i + 1; }
inline int eq(int i) { return 4 * i + 2; }
inline int ed(int i) { return 4 * i + 3; }
inline int tm(int i) { return 2 * i; }
inline int efd(int i) { return 2 * i + 1; }
inline int e_r(int, int i) { return i; }
inline int e_i(int m, int i) { return m + i; }
inline int i_r(int m, int i) { return 2 * m + i; }
inline int i_i(int m, int i) { return 3 * m + i; }
}  // namespace idx

struct InterfaceCurrents {
    Vec i_r, i_i, i_d, i_q;
};

InterfaceCurrents interface_currents(const Vec& x, const CMat& y);

Vec f_eval(const SystemCase& sys, const Vec& x, const Vec& u, const CMat& y);
Vec h_eval(const SystemCase& sys, const Vec& x, const CMat& y);

// f(x, u) = A x + B u + phi(x)
struct LinearSplit {
    Mat A;
    Mat B;
    std::vector<MachineParams> machines;
    double omega_s = 0.0;

    Vec phi(const Vec& x, const CMat& y) const;
};

LinearSplit split_linear(const SystemCase& sys);

// Central differences with per-component step rel_step * max(1, |x_i|).
Mat fd_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x, double rel_step = 1e-6);

Mat jacobian_f(const SystemCase& sys, const Vec& x, const Vec& u, const CMat& y);
Mat jacobian_h(const SystemCase& sys, const Vec& x, const CMat& y);

// Rotations between the network (R, I) frame and a machine's (d, q) frame.
struct DQ {
    double d, q;
};
struct RI {
    double r, i;
};
inline DQ ri_to_dq(RI v, double delta) {
    const double s = std::sin(delta), c = std::cos(delta);
    return {v.r * s - v.i * c, v.r * c + v.i * s};
}
inline RI dq_to_ri(DQ v, double delta) {
    const double s = std::sin(delta), c = std::cos(delta);
    return {v.d * s + v.q * c, v.q * s - v.d * c};
}

}  // namespace dse
