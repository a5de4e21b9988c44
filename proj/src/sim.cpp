#include "dse/sim.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "dse/errors.hpp"

namespace dse {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
}

Vec w_eval(double t, double omega_u) {
    const double c = std::cos(omega_u * t), s = std::sin(omega_u * t);
    Vec w(8);
    w << 0.5 * c, 0.5 * s, 0.5 * c, 0.5 * s, -std::exp(-5.0 * t), 0.2 * std::exp(-t) * c, 0.2 * c, 0.1 * s;
    return w;
}

Vec rk4_step(const TimeDerivative& f, double t, const Vec& x, double dt) {
    if (!(dt > 0.0)) throw ContractViolation("rk4_step: dt must be positive");
    const Vec k1 = f(t, x);
    const Vec k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Vec k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Vec k4 = f(t + dt, x + dt * k3);
    Vec out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!out.allFinite()) throw DivergenceError(fmt::format("non-finite state at t = {:.6f} s", t + dt), t + dt);
    return out;
}

UnknownInputSpec make_unknown_input(const Vec& delta_max, std::uint64_t seed, double omega_u) {
    auto eng = make_engine(seed, stream::bw);
    std::normal_distribution<double> nd(0.0, 1.0);
    UnknownInputSpec ui{Mat(delta_max.size(), 8), omega_u};
    for (Eigen::Index i = 0; i < delta_max.size(); ++i)
        for (int j = 0; j < 8; ++j) ui.bw(i, j) = 0.5 * delta_max[i] * nd(eng);
    return ui;
}

int ScenarioSchedule::samples() const { return static_cast<int>(std::lround(t_end * sample_rate)) + 1; }

bool ScenarioSchedule::estimator_uses_pre(int k) const {
    return k < std::lround(wrong_admittance_until * sample_rate);
}

void ScenarioSchedule::validate() const {
    if (!(t_end > 0.0)) throw ContractViolation("t_end must be positive");
    if (sample_rate <= 0 || steps_per_sample <= 0) throw ContractViolation("sample rate and micro-steps must be positive");
    if (std::abs(t_end * sample_rate - std::round(t_end * sample_rate)) > 1e-9)
        throw ContractViolation("t_end must be a whole number of sample intervals");
    if (wrong_admittance_until < 0.0 || wrong_admittance_until > t_end)
        throw ContractViolation("wrong_admittance_until must lie in [0, t_end]");
    if (process_noise_fraction < 0.0) throw ContractViolation("process_noise_fraction must be non-negative");
}

namespace {

void guard_speed(const SystemCase& sys, const Vec& x, double t) {
    for (int i = 0; i < sys.m(); ++i) {
        const double w = x[idx::omega(i)];
        if (!(w >= 0.5 * sys.omega_s && w <= 1.5 * sys.omega_s))
            throw DivergenceError(fmt::format("rotor speed of machine {} left the valid band at t = {:.4f} s", i, t), t);
    }
}

}  // namespace

TruthTrajectory simulate_truth(const SystemCase& sys, const ScenarioSchedule& sched, const UnknownInputSpec& ui,
                               const Vec& q_std, std::uint64_t q_seed, const CMat* y_override) {
    sys.validate_structure();
    sched.validate();
    const int n = sys.n();
    const bool has_ui = ui.bw.size() > 0;
    if (has_ui && (ui.bw.rows() != n || ui.bw.cols() != 8)) throw ContractViolation("Bw must be n x 8");
    const bool has_q = q_std.size() > 0;
    if (has_q && q_std.size() != n) throw ContractViolation("process noise std must have length n");

    const CMat& y = y_override ? *y_override : sys.y_post;
    const TimeDerivative f = [&](double t, const Vec& x) -> Vec {
        Vec dx = f_eval(sys, x, sys.u0, y);
        if (has_ui) dx += ui.bw * w_eval(t, ui.omega_u);
        return dx;
    };

    auto eng = make_engine(q_seed, stream::process);
    std::normal_distribution<double> nd(0.0, 1.0);

    const int ns = sched.samples();
    const double dt = sched.dt();
    TruthTrajectory tr;
    tr.times.reserve(ns);
    tr.states.reserve(ns);
    tr.clean_measurements.reserve(ns);
    Vec x = sys.x0;
    for (int k = 0; k < ns; ++k) {
        const double tk = sched.time(k);
        if (k > 0) {
            const double t0 = sched.time(k - 1);
            for (int s = 0; s < sched.steps_per_sample; ++s) x = rk4_step(f, t0 + s * dt, x, dt);
            if (has_q)
                for (int i = 0; i < n; ++i) x[i] += q_std[i] * nd(eng);
            guard_speed(sys, x, tk);
        }
        tr.times.push_back(tk);
        tr.states.push_back(x);
        tr.clean_measurements.push_back(h_eval(sys, x, y));
    }
    tr.delta_max = largest_state_change(tr.states);
    return tr;
}

Vec largest_state_change(const std::vector<Vec>& states) {
    if (states.empty()) throw ContractViolation("largest_state_change: empty trajectory");
    Vec out = Vec::Zero(states.front().size());
    for (const auto& x : states) out = out.cwiseMax((x - states.front()).cwiseAbs());
    return out;
}

TruthSetup prepare_truth(const SystemCase& sys, const ScenarioSchedule& sched, std::uint64_t bw_seed) {
    const auto pre = simulate_truth(sys, sched, UnknownInputSpec{}, Vec(), 0);
    TruthSetup s;
    s.delta_max = pre.delta_max;
    s.unknown_input = make_unknown_input(s.delta_max, bw_seed);
    s.q_std = sched.process_noise_fraction * s.delta_max;
    return s;
}

void write_trajectory_csv(const std::filesystem::path& path, const TruthTrajectory& traj) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    const auto n = traj.states.empty() ? 0 : traj.states.front().size();
    const auto p = traj.clean_measurements.empty() ? 0 : traj.clean_measurements.front().size();
    out << "t";
    for (Eigen::Index i = 1; i <= n; ++i) out << ",x_" << i;
    for (Eigen::Index i = 1; i <= p; ++i) out << ",y_" << i;
    out << '\n';
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        out << fmt::format("{}", traj.times[k]);
        for (Eigen::Index i = 0; i < n; ++i) out << fmt::format(",{}", traj.states[k][i]);
        for (Eigen::Index i = 0; i < p; ++i) out << fmt::format(",{}", traj.clean_measurements[k][i]);
        out << '\n';
    }
}

}  // namespace dse
