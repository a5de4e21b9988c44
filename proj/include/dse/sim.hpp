#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "dse/powermodel.hpp"

namespace dse {

// Seeded engine for a named stream; equal seeds on different streams give
// unrelated sequences.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream);

namespace stream {
inline constexpr std::uint64_t bw = 1;
inline constexpr std::uint64_t process = 2;
inline constexpr std::uint64_t measurement = 3;
inline constexpr std::uint64_t sampling = 4;
}  // namespace stream

// The 8-channel unknown input signal.
Vec w_eval(double t, double omega_u = 100.0);

using TimeDerivative = std::function<Vec(double t, const Vec& x)>;

Vec rk4_step(const TimeDerivative& f, double t, const Vec& x, double dt);

struct UnknownInputSpec {
    Mat bw;  // n x 8; empty means no unknown input
    double omega_u = 100.0;
};

// Bw entries drawn N(0, (0.5 * delta_max_i)^2) row by row.
UnknownInputSpec make_unknown_input(const Vec& delta_max, std::uint64_t seed, double omega_u = 100.0);

struct ScenarioSchedule {
    double t_end = 10.0;
    int sample_rate = 60;
    int steps_per_sample = 10;
    double wrong_admittance_until = 1.0;
    double process_noise_fraction = 0.05;

    double sample_dt() const { return 1.0 / sample_rate; }
    double dt() const { return sample_dt() / steps_per_sample; }
    int samples() const;  // t_end * sample_rate + 1
    double time(int k) const { return static_cast<double>(k) / sample_rate; }
    // Estimator-side admittance: pre-fault before wrong_admittance_until.
    bool estimator_uses_pre(int k) const;
    void validate() const;
};

struct TruthTrajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> clean_measurements;
    Vec delta_max;  // largest change of this trajectory
};

// Integrates x' = f(x, u0, Y_post) + Bw w(t) with RK4 and adds
// N(0, diag(q_std^2)) once per sample interval. q_std empty means no noise.
TruthTrajectory simulate_truth(const SystemCase& sys, const ScenarioSchedule& sched, const UnknownInputSpec& ui,
                               const Vec& q_std, std::uint64_t q_seed, const CMat* y_override = nullptr);

Vec largest_state_change(const std::vector<Vec>& states);

// Everything derived from the noise-free, unknown-input-free pre-pass.
struct TruthSetup {
    Vec delta_max;
    UnknownInputSpec unknown_input;
    Vec q_std;  // process_noise_fraction * delta_max
};

TruthSetup prepare_truth(const SystemCase& sys, const ScenarioSchedule& sched, std::uint64_t bw_seed);

void write_trajectory_csv(const std::filesystem::path& path, const TruthTrajectory& traj);

}  // namespace dse
