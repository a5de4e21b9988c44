#include "dse/powermodel.hpp"

#include <fmt/format.h>

#include "dse/errors.hpp"

namespace dse {

void MachineParams::validate() const {
    auto req = [](bool ok, const char* what) {
        if (!ok) throw ContractViolation(fmt::format("machine parameters: {}", what));
    };
    req(h > 0.0, "H must be positive");
    req(td0p > 0.0, "T'd0 must be positive");
    req(tq0p > 0.0, "T'q0 must be positive");
    req(xdp > 0.0 && xd >= xdp, "need xd >= x'd > 0");
    req(xqp > 0.0 && xq >= xqp, "need xq >= x'q > 0");
    req(d >= 0.0, "D must be non-negative");
}

void SystemCase::validate_structure() const {
    if (machines.empty()) throw ContractViolation("case has no machines");
    for (const auto& mc : machines) mc.validate();
    const int mm = m();
    if (y_pre.rows() != mm || y_pre.cols() != mm) throw ContractViolation("y_pre must be m x m");
    if (y_post.rows() != mm || y_post.cols() != mm) throw ContractViolation("y_post must be m x m");
    if (u0.size() != 2 * mm) throw ContractViolation("u0 must have length 2m");
    if (x0.size() != 4 * mm) throw ContractViolation("x0 must have length 4m");
    if (!(omega_s > 0.0)) throw ContractViolation("omega_s must be positive");
    if (!y_pre.allFinite() || !y_post.allFinite() || !u0.allFinite() || !x0.allFinite())
        throw ContractViolation("case contains non-finite entries");
}

void SystemCase::validate(double equilibrium_tol) const {
    validate_structure();
    const double r = f_eval(*this, x0, u0, y_pre).lpNorm<Eigen::Infinity>();
    if (!(r < equilibrium_tol))
        throw ContractViolation(fmt::format("x0 is not a pre-fault equilibrium (residual {:.3e})", r));
}

InterfaceCurrents interface_currents(const Vec& x, const CMat& y) {
    if (x.size() % 4 != 0 || y.rows() != x.size() / 4 || y.cols() != y.rows())
        throw ContractViolation(fmt::format("interface_currents: state length {} vs admittance {}x{}",
                                            x.size(), y.rows(), y.cols()));
    const Eigen::Index m = y.rows();
    CVec psi(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const RI e = dq_to_ri({x[idx::ed(i)], x[idx::eq(i)]}, x[idx::delta(i)]);
        psi[i] = {e.r, e.i};
    }
    const CVec cur = y * psi;
    InterfaceCurrents out{Vec(m), Vec(m), Vec(m), Vec(m)};
    for (Eigen::Index i = 0; i < m; ++i) {
        out.i_r[i] = cur[i].real();
        out.i_i[i] = cur[i].imag();
        const DQ c = ri_to_dq({out.i_r[i], out.i_i[i]}, x[idx::delta(i)]);
        out.i_d[i] = c.d;
        out.i_q[i] = c.q;
    }
    return out;
}

namespace {

void check_dims(const SystemCase& sys, const Vec& x, const CMat& y) {
    const int m = sys.m();
    if (x.size() != 4 * m || y.rows() != m || y.cols() != m)
        throw ContractViolation(fmt::format("state length {} / admittance {}x{} inconsistent with {} machines",
                                            x.size(), y.rows(), y.cols(), m));
}

void check_finite(const Vec& v, const char* what) {
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (!std::isfinite(v[k])) throw NumericError(fmt::format("{}: non-finite value at machine {}", what, k / 4));
}

double air_gap_torque(const MachineParams& mc, double eq, double ed, double id, double iq) {
    return ed * id + eq * iq + (mc.xqp - mc.xdp) * id * iq;
}

}  // namespace

Vec f_eval(const SystemCase& sys, const Vec& x, const Vec& u, const CMat& y) {
    check_dims(sys, x, y);
    if (u.size() != 2 * sys.m()) throw ContractViolation("input length must be 2m");
    const auto cur = interface_currents(x, y);
    const double ws = sys.omega_s;
    Vec dx(x.size());
    for (int i = 0; i < sys.m(); ++i) {
        const auto& mc = sys.machines[i];
        const double w = x[idx::omega(i)], eq = x[idx::eq(i)], ed = x[idx::ed(i)];
        const double id = cur.i_d[i], iq = cur.i_q[i];
        const double te = air_gap_torque(mc, eq, ed, id, iq);
        dx[idx::delta(i)] = w - ws;
        dx[idx::omega(i)] = ws / (2.0 * mc.h) * (u[idx::tm(i)] - te - mc.d / ws * (w - ws));
        dx[idx::eq(i)] = (u[idx::efd(i)] - eq - (mc.xd - mc.xdp) * id) / mc.td0p;
        dx[idx::ed(i)] = (-ed + (mc.xq - mc.xqp) * iq) / mc.tq0p;
    }
    check_finite(dx, "f_eval");
    return dx;
}

Vec h_eval(const SystemCase& sys, const Vec& x, const CMat& y) {
    check_dims(sys, x, y);
    const int m = sys.m();
    const auto cur = interface_currents(x, y);
    Vec out(4 * m);
    for (int i = 0; i < m; ++i) {
        const auto& mc = sys.machines[i];
        const double e_q = x[idx::eq(i)] - mc.xdp * cur.i_d[i];
        const double e_d = x[idx::ed(i)] + mc.xqp * cur.i_q[i];
        const RI v = dq_to_ri({e_d, e_q}, x[idx::delta(i)]);
        out[idx::e_r(m, i)] = v.r;
        out[idx::e_i(m, i)] = v.i;
        out[idx::i_r(m, i)] = cur.i_r[i];
        out[idx::i_i(m, i)] = cur.i_i[i];
    }
    check_finite(out, "h_eval");
    return out;
}

LinearSplit split_linear(const SystemCase& sys) {
    sys.validate_structure();
    const int m = sys.m(), n = sys.n();
    LinearSplit s{Mat::Zero(n, n), Mat::Zero(n, 2 * m), sys.machines, sys.omega_s};
    for (int i = 0; i < m; ++i) {
        const auto& mc = sys.machines[i];
        s.A(idx::delta(i), idx::omega(i)) = 1.0;
        s.A(idx::omega(i), idx::omega(i)) = -mc.d / (2.0 * mc.h);
        s.A(idx::eq(i), idx::eq(i)) = -1.0 / mc.td0p;
        s.A(idx::ed(i), idx::ed(i)) = -1.0 / mc.tq0p;
        s.B(idx::omega(i), idx::tm(i)) = sys.omega_s / (2.0 * mc.h);
        s.B(idx::eq(i), idx::efd(i)) = 1.0 / mc.td0p;
    }
    return s;
}

Vec LinearSplit::phi(const Vec& x, const CMat& y) const {
    const int m = static_cast<int>(machines.size());
    if (x.size() != 4 * m || y.rows() != m) throw ContractViolation("phi: dimension mismatch");
    const auto cur = interface_currents(x, y);
    const double ws = omega_s;
    Vec out(x.size());
    for (int i = 0; i < m; ++i) {
        const auto& mc = machines[i];
        const double id = cur.i_d[i], iq = cur.i_q[i];
        const double te = air_gap_torque(mc, x[idx::eq(i)], x[idx::ed(i)], id, iq);
        out[idx::delta(i)] = -ws;
        out[idx::omega(i)] = -ws / (2.0 * mc.h) * te + mc.d / (2.0 * mc.h) * ws;
        out[idx::eq(i)] = -(mc.xd - mc.xdp) * id / mc.td0p;
        out[idx::ed(i)] = (mc.xq - mc.xqp) * iq / mc.tq0p;
    }
    check_finite(out, "phi");
    return out;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x, double rel_step) {
    Vec xp = x;
    Mat jac;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = rel_step * std::max(1.0, std::abs(x[j]));
        const double hi = x[j] + h, lo = x[j] - h;
        xp[j] = hi;
        const Vec fp = fn(xp);
        xp[j] = lo;
        const Vec fm = fn(xp);
        xp[j] = x[j];
        if (j == 0) jac.resize(fp.size(), x.size());
        jac.col(j) = (fp - fm) / (hi - lo);
    }
    if (!jac.allFinite()) throw NumericError("finite-difference Jacobian has non-finite entries");
    return jac;
}

Mat jacobian_f(const SystemCase& sys, const Vec& x, const Vec& u, const CMat& y) {
    return fd_jacobian([&](const Vec& z) { return f_eval(sys, z, u, y); }, x);
}

Mat jacobian_h(const SystemCase& sys, const Vec& x, const CMat& y) {
    return fd_jacobian([&](const Vec& z) { return h_eval(sys, z, y); }, x);
}

}  // namespace dse
