#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "dse/case_io.hpp"
#include "dse/errors.hpp"
#include "dse/powermodel.hpp"
#include "test_support.hpp"

using namespace dse;
using dse::testing::Gen;
using dse::testing::max_abs;
using dse::testing::shipped_case;

namespace {

SystemCase one_machine(std::complex<double> y) {
    SystemCase sys;
    sys.machines.push_back({5.0, 2.0, 1.2, 0.9, 0.3, 0.5, 6.0, 0.6});
    sys.y_pre = sys.y_post = CMat::Constant(1, 1, y);
    sys.u0 = Vec::Constant(2, 1.0);
    sys.x0 = Vec::Zero(4);
    return sys;
}

}  // namespace

// ---------------------------------------------------------------------------
// interface_currents

TEST(InterfaceCurrents, AxisAlignedSingleMachine) {
    Vec x(4);
    x << std::numbers::pi / 2, 0.0, 1.0, 0.0;
    const auto c = interface_currents(x, CMat::Constant(1, 1, {1.0, 0.0}));
    EXPECT_NEAR(c.i_r[0], 0.0, 1e-15);
    EXPECT_NEAR(c.i_i[0], 1.0, 1e-15);
    EXPECT_NEAR(c.i_d[0], 0.0, 1e-15);
    EXPECT_NEAR(c.i_q[0], 1.0, 1e-15);
}

TEST(InterfaceCurrents, ZeroAdmittanceGivesZeroCurrents) {
    Gen g(1);
    const Vec x = g.state(3, 377.0);
    const auto c = interface_currents(x, CMat::Zero(3, 3));
    EXPECT_EQ(c.i_r.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(c.i_i.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(c.i_d.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(c.i_q.cwiseAbs().maxCoeff(), 0.0);
}

TEST(InterfaceCurrents, RotationPreservesMagnitude) {
    Gen g(2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = interface_currents(g.state(2, 377.0), g.cmat(2));
        for (int i = 0; i < 2; ++i) {
            const double dq = c.i_d[i] * c.i_d[i] + c.i_q[i] * c.i_q[i];
            const double ri = c.i_r[i] * c.i_r[i] + c.i_i[i] * c.i_i[i];
            EXPECT_NEAR(dq, ri, 1e-12 * std::max(1.0, ri));
        }
    }
}

TEST(InterfaceCurrents, DimensionMismatchIsContractViolation) {
    EXPECT_THROW(interface_currents(Vec::Zero(8), CMat::Zero(3, 3)), ContractViolation);
    EXPECT_THROW(interface_currents(Vec::Zero(7), CMat::Zero(2, 2)), ContractViolation);
}

TEST(Rotation, DqAndRiAreInverse) {
    Gen g(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const double delta = g.uniform(-10.0, 10.0);
        const RI v{g.normal(), g.normal()};
        const RI back = dq_to_ri(ri_to_dq(v, delta), delta);
        EXPECT_NEAR(back.r, v.r, 1e-14 * std::max(1.0, std::abs(v.r)) * 4);
        EXPECT_NEAR(back.i, v.i, 1e-14 * std::max(1.0, std::abs(v.i)) * 4);
    }
}

// ---------------------------------------------------------------------------
// f_eval

TEST(FEval, ShippedCaseStartsAtEquilibrium) {
    const auto& sys = shipped_case();
    EXPECT_LT(f_eval(sys, sys.x0, sys.u0, sys.y_pre).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(FEval, DecoupledMachine) {
    SystemCase sys = one_machine({0.0, 0.0});
    sys.machines[0].xq = sys.machines[0].xqp;
    Vec x(4);
    x << 0.3, sys.omega_s, 1.1, 0.25;
    Vec u(2);
    u << 0.0, 1.1;
    const Vec dx = f_eval(sys, x, u, sys.y_pre);
    EXPECT_DOUBLE_EQ(dx[0], 0.0);
    EXPECT_DOUBLE_EQ(dx[1], 0.0);
    EXPECT_DOUBLE_EQ(dx[2], 0.0);
    EXPECT_DOUBLE_EQ(dx[3], -0.25 / sys.machines[0].tq0p);
}

TEST(FEval, RotorAngleDisplacementGivesRestoringTorque) {
    const auto& sys = shipped_case();
    Vec x = sys.x0;
    x[idx::delta(0)] += 0.1;
    EXPECT_LT(f_eval(sys, x, sys.u0, sys.y_pre)[idx::omega(0)], 0.0);
}

TEST(FEval, NonFiniteStateIsNumericError) {
    const auto& sys = shipped_case();
    Vec x = sys.x0;
    x[idx::eq(1)] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(f_eval(sys, x, sys.u0, sys.y_pre), NumericError);
}

TEST(FEval, PeriodicInRotorAngles) {
    const auto& sys = shipped_case();
    Gen g(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec x = g.state(3, sys.omega_s);
        Vec shifted = x;
        for (int i = 0; i < 3; ++i) shifted[idx::delta(i)] += 2.0 * std::numbers::pi;
        EXPECT_LT(max_abs(f_eval(sys, x, sys.u0, sys.y_post) - f_eval(sys, shifted, sys.u0, sys.y_post)), 1e-12);
        EXPECT_LT(max_abs(h_eval(sys, x, sys.y_post) - h_eval(sys, shifted, sys.y_post)), 1e-12);
    }
}

// ---------------------------------------------------------------------------
// h_eval

TEST(HEval, OpenCircuitMachine) {
    const SystemCase sys = one_machine({0.0, 0.0});
    Vec x(4);
    x << 0.0, sys.omega_s, 1.07, 0.0;
    const Vec y = h_eval(sys, x, sys.y_pre);
    EXPECT_DOUBLE_EQ(y[0], 1.07);
    EXPECT_DOUBLE_EQ(y[1], 0.0);
    EXPECT_DOUBLE_EQ(y[2], 0.0);
    EXPECT_DOUBLE_EQ(y[3], 0.0);
}

TEST(HEval, ShippedTerminalVoltagesInBand) {
    const auto& sys = shipped_case();
    const Vec y = h_eval(sys, sys.x0, sys.y_pre);
    for (int i = 0; i < sys.m(); ++i) {
        const double v = std::hypot(y[idx::e_r(sys.m(), i)], y[idx::e_i(sys.m(), i)]);
        EXPECT_GE(v, 0.8);
        EXPECT_LE(v, 1.2);
    }
}

TEST(HEval, ChannelOrderIsGroupedByQuantity) {
    const auto& sys = shipped_case();
    const Vec y = h_eval(sys, sys.x0, sys.y_pre);
    const auto c = interface_currents(sys.x0, sys.y_pre);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(y[6 + i], c.i_r[i]);
        EXPECT_EQ(y[9 + i], c.i_i[i]);
    }
}

// ---------------------------------------------------------------------------
// split_linear

TEST(SplitLinear, ReconstructsF) {
    Gen g(5);
    for (int trial = 0; trial < 100; ++trial) {
        const SystemCase sys = dse::testing::random_case(g, 1 + trial % 4);
        const LinearSplit s = split_linear(sys);
        const Vec x = g.state(sys.m(), sys.omega_s);
        const Vec u = g.vec(2 * sys.m(), 0.0, 2.0);
        const Vec rebuilt = s.A * x + s.B * u + s.phi(x, sys.y_post);
        EXPECT_LT(max_abs(rebuilt - f_eval(sys, x, u, sys.y_post)), 1e-12);
    }
}

TEST(SplitLinear, TorqueFreeCaseStillExact) {
    SystemCase sys = one_machine({0.0, 0.0});
    sys.machines[0].xd = sys.machines[0].xdp;
    sys.machines[0].xq = sys.machines[0].xqp;
    const LinearSplit s = split_linear(sys);
    Vec x(4);
    x << 0.4, sys.omega_s + 1.0, 1.0, 0.1;
    const Vec phi = s.phi(x, sys.y_pre);
    EXPECT_DOUBLE_EQ(phi[0], -sys.omega_s);
    EXPECT_NEAR(phi[1], sys.machines[0].d / (2 * sys.machines[0].h) * sys.omega_s, 1e-12);
    EXPECT_EQ(phi[2], 0.0);
    EXPECT_EQ(phi[3], 0.0);
    EXPECT_LT(max_abs(s.A * x + s.B * sys.u0 + phi - f_eval(sys, x, sys.u0, sys.y_pre)), 1e-12);
}

TEST(SplitLinear, ZeroEigenvalueMultiplicityAtLeastM) {
    const auto& sys = shipped_case();
    const LinearSplit s = split_linear(sys);
    const Eigen::VectorXcd ev = s.A.eigenvalues();
    int zeros = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) zeros += std::abs(ev[i]) < 1e-12;
    EXPECT_GE(zeros, sys.m());
}

TEST(SplitLinear, InputMapGains) {
    const auto& sys = shipped_case();
    const LinearSplit s = split_linear(sys);
    for (int i = 0; i < sys.m(); ++i) {
        const auto& mc = sys.machines[i];
        EXPECT_DOUBLE_EQ(s.B(idx::omega(i), idx::tm(i)), sys.omega_s / (2 * mc.h));
        EXPECT_DOUBLE_EQ(s.B(idx::eq(i), idx::efd(i)), 1.0 / mc.td0p);
        EXPECT_DOUBLE_EQ(s.A(idx::omega(i), idx::omega(i)), -mc.d / (2 * mc.h));
    }
    EXPECT_EQ(s.B.col(idx::tm(0)).cwiseAbs().sum(), s.B(idx::omega(0), idx::tm(0)));
}

// ---------------------------------------------------------------------------
// Jacobians

TEST(Jacobian, AngleRowIsUnitInSpeed) {
    const auto& sys = shipped_case();
    const Mat J = jacobian_f(sys, sys.x0, sys.u0, sys.y_pre);
    for (int i = 0; i < sys.m(); ++i) EXPECT_NEAR(J(idx::delta(i), idx::omega(i)), 1.0, 1e-8);
}

TEST(Jacobian, ZeroAdmittanceCurrentRowsVanish) {
    const auto& sys = shipped_case();
    const Mat H = jacobian_h(sys, sys.x0, CMat::Zero(3, 3));
    EXPECT_EQ(max_abs(H.bottomRows(6)), 0.0);
}

// Single machine: i_q - j i_d = Y (e'q - j e'd), so the currents do not
// depend on delta and the torque partials follow by hand.
TEST(Jacobian, MatchesHandDerivedTorqueTerm) {
    const std::complex<double> y{0.8, -2.5};
    const SystemCase sys = one_machine(y);
    const auto& mc = sys.machines[0];
    Vec x(4);
    x << 0.7, sys.omega_s + 0.3, 1.05, 0.2;
    const double G = y.real(), B = y.imag(), eq = x[2], ed = x[3];
    const double iq = G * eq + B * ed, id = G * ed - B * eq;
    const double k = mc.xqp - mc.xdp;
    const double dte_deq = ed * (-B) + iq + eq * G + k * (-B * iq + id * G);
    const double dte_ded = id + ed * G + eq * B + k * (G * iq + id * B);
    const double gain = -sys.omega_s / (2.0 * mc.h);

    const Mat J = jacobian_f(sys, x, sys.u0, sys.y_pre);
    EXPECT_NEAR(J(1, 0), 0.0, 1e-5);
    EXPECT_NEAR(J(1, 2), gain * dte_deq, 1e-5 * std::abs(gain * dte_deq));
    EXPECT_NEAR(J(1, 3), gain * dte_ded, 1e-5 * std::abs(gain * dte_ded));
    EXPECT_NEAR(J(2, 2), (-1.0 + (mc.xd - mc.xdp) * B) / mc.td0p, 1e-7);
    EXPECT_NEAR(J(3, 3), (-1.0 + (mc.xq - mc.xqp) * B) / mc.tq0p, 1e-7);
}

TEST(Jacobian, AgreesWithIndependentStepFiniteDifferences) {
    const auto& sys = shipped_case();
    Gen g(6);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec x = g.state(3, sys.omega_s);
        const Mat J = jacobian_f(sys, x, sys.u0, sys.y_post);
        const Mat H = jacobian_h(sys, x, sys.y_post);
        const Mat J2 = fd_jacobian([&](const Vec& z) { return f_eval(sys, z, sys.u0, sys.y_post); }, x, 1e-7);
        const Mat H2 = fd_jacobian([&](const Vec& z) { return h_eval(sys, z, sys.y_post); }, x, 1e-7);
        EXPECT_LT(max_abs(J - J2), 1e-4 * std::max(1.0, max_abs(J2)));
        EXPECT_LT(max_abs(H - H2), 1e-4 * std::max(1.0, max_abs(H2)));
    }
}

// ---------------------------------------------------------------------------
// Case validation and file round trip

TEST(CaseValidation, RejectsBadParameters) {
    SystemCase sys = shipped_case();
    sys.machines[1].xdp = sys.machines[1].xd + 0.1;
    EXPECT_THROW(sys.validate(), ContractViolation);
    sys = shipped_case();
    sys.machines[0].h = 0.0;
    EXPECT_THROW(sys.validate(), ContractViolation);
    sys = shipped_case();
    sys.y_post = CMat::Zero(2, 2);
    EXPECT_THROW(sys.validate(), ContractViolation);
}

TEST(CaseValidation, RejectsNonEquilibriumInitialState) {
    SystemCase sys = shipped_case();
    sys.x0[idx::delta(2)] += 0.05;
    EXPECT_THROW(sys.validate(), ContractViolation);
}

TEST(CaseIo, RoundTripIsExact) {
    const auto& sys = shipped_case();
    const auto path = std::filesystem::temp_directory_path() / "dse_case_roundtrip.json";
    save_case(sys, path);
    const SystemCase back = load_case(path);
    EXPECT_EQ(back.m(), sys.m());
    EXPECT_EQ(back.y_pre, sys.y_pre);
    EXPECT_EQ(back.y_post, sys.y_post);
    EXPECT_EQ(back.x0, sys.x0);
    EXPECT_EQ(back.u0, sys.u0);
    EXPECT_EQ(back.omega_s, sys.omega_s);
    std::filesystem::remove(path);
}

TEST(CaseIo, AcceptsNestedRowsAndRejectsGarbage) {
    auto j = case_to_json(shipped_case());
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < 3; ++c) row.push_back(j["y_pre"][3 * r + c]);
        rows.push_back(row);
    }
    j["y_pre"] = rows;
    EXPECT_EQ(case_from_json(j).y_pre, shipped_case().y_pre);
    j.erase("u0");
    EXPECT_THROW(case_from_json(j), ConfigError);
}
