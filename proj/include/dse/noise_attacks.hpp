#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dse/types.hpp"

namespace dse {

enum class NoiseKind { gaussian, laplace, cauchy };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::gaussian;
    double std = 0.01;
    double m = 0.0;  // Laplace location
    double s = 0.02;  // Laplace scale
    double a = 0.0;  // Cauchy location
    double b = 1e-4;  // Cauchy scale
    std::uint64_t seed = 0;

    void validate() const;
};

// r = m - s * sgn(u1) * ln(1 - 2|u1|), u1 in (-0.5, 0.5]
double laplace_noise(double m, double s, double u1);
// r = a + b * tan(pi (u2 - 0.5)), u2 in (0, 1)
double cauchy_noise(double a, double b, double u2);

class NoiseGenerator {
public:
    explicit NoiseGenerator(const NoiseSpec& spec);
    double draw();
    Vec sample(Eigen::Index p);

private:
    NoiseSpec spec_;
    std::mt19937_64 eng_;
};

Vec gaussian_noise(Eigen::Index p, double std, std::uint64_t seed);

enum class AttackKind { none, integrity, dos, replay };

struct AttackSpec {
    AttackKind kind = AttackKind::none;
    std::vector<int> channels;     // 0-based measurement indices
    std::vector<double> factors;   // integrity scaling, one per channel
    double t_start = 0.0;
    double t_end = 0.0;
    double replay_shift = 3.0;

    void validate(Eigen::Index p, double horizon) const;
};

// All eR channels; integrity scales the first ceil(m/2) by 0.6 and the rest
// by 1/0.6 over the whole run, DoS and replay act on [3, 6] s.
AttackSpec default_attack(AttackKind kind, int machines, double horizon);

struct MeasurementSeries {
    std::vector<double> times;
    std::vector<Vec> values;
};

MeasurementSeries apply_attack(const MeasurementSeries& clean, const AttackSpec& spec);
MeasurementSeries add_noise(const MeasurementSeries& series, const NoiseSpec& spec);

std::string to_string(NoiseKind k);
std::string to_string(AttackKind k);
NoiseKind noise_kind_from_string(const std::string& s);
AttackKind attack_kind_from_string(const std::string& s);

}  // namespace dse
