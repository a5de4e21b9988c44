#include "dse/noise_attacks.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dse/errors.hpp"
#include "dse/sim.hpp"

namespace dse {

void NoiseSpec::validate() const {
    if (!(std > 0.0) || !(s > 0.0) || !(b > 0.0)) throw ContractViolation("noise scales must be positive");
}

double laplace_noise(double m, double s, double u1) {
    if (!(u1 > -0.5 && u1 <= 0.5)) throw ContractViolation("laplace_noise: u1 must lie in (-0.5, 0.5]");
    const double mag = std::min(std::abs(u1), 0.5 - 1e-15);
    const double sgn = (u1 > 0.0) - (u1 < 0.0);
    return m - s * sgn * std::log(1.0 - 2.0 * mag);
}

double cauchy_noise(double a, double b, double u2) {
    if (!(u2 > 0.0 && u2 < 1.0)) throw ContractViolation("cauchy_noise: u2 must lie in (0, 1)");
    return a + b * std::tan(std::numbers::pi * (u2 - 0.5));
}

NoiseGenerator::NoiseGenerator(const NoiseSpec& spec) : spec_(spec), eng_(make_engine(spec.seed, stream::measurement)) {
    spec_.validate();
}

double NoiseGenerator::draw() {
    switch (spec_.kind) {
        case NoiseKind::gaussian:
            return std::normal_distribution<double>(0.0, spec_.std)(eng_);
        case NoiseKind::laplace: {
            // uniform on [-0.5, 0.5) reflected to (-0.5, 0.5]
            const double u = std::uniform_real_distribution<double>(-0.5, 0.5)(eng_);
            return laplace_noise(spec_.m, spec_.s, -u);
        }
        case NoiseKind::cauchy: {
            double u = 0.0;
            while (u == 0.0) u = std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
            return cauchy_noise(spec_.a, spec_.b, u);
        }
    }
    return 0.0;
}

Vec NoiseGenerator::sample(Eigen::Index p) {
    Vec v(p);
    for (Eigen::Index i = 0; i < p; ++i) v[i] = draw();
    return v;
}

Vec gaussian_noise(Eigen::Index p, double std, std::uint64_t seed) {
    NoiseSpec spec;
    spec.std = std;
    spec.seed = seed;
    return NoiseGenerator(spec).sample(p);
}

void AttackSpec::validate(Eigen::Index p, double horizon) const {
    if (kind == AttackKind::none) return;
    if (channels.empty()) throw ContractViolation("attack targets no channels");
    for (int c : channels)
        if (c < 0 || c >= p) throw ContractViolation(fmt::format("attack channel {} outside [0, {})", c, p));
    if (kind == AttackKind::integrity && factors.size() != channels.size())
        throw ContractViolation("integrity attack needs one factor per channel");
    if (t_start < 0.0 || t_end > horizon + 1e-9 || t_start > t_end)
        throw ContractViolation("attack window must lie inside [0, t_end]");
    if (kind == AttackKind::replay && replay_shift > t_start + 1e-9)
        throw ContractViolation("replay shift exceeds window start");
}

AttackSpec default_attack(AttackKind kind, int machines, double horizon) {
    AttackSpec a;
    a.kind = kind;
    if (kind == AttackKind::none) return a;
    const int first = (machines + 1) / 2;
    for (int i = 0; i < machines; ++i) {
        a.channels.push_back(i);
        a.factors.push_back(i < first ? 0.6 : 1.0 / 0.6);
    }
    if (kind == AttackKind::integrity) {
        a.t_start = 0.0;
        a.t_end = horizon;
    } else {
        a.t_start = 3.0;
        a.t_end = 6.0;
    }
    return a;
}

MeasurementSeries apply_attack(const MeasurementSeries& clean, const AttackSpec& spec) {
    if (spec.kind == AttackKind::none || clean.values.empty()) return clean;
    const double horizon = clean.times.back();
    spec.validate(clean.values.front().size(), horizon);
    const auto ns = static_cast<long>(clean.times.size());
    const double step = ns > 1 ? (clean.times.back() - clean.times.front()) / static_cast<double>(ns - 1) : 1.0;
    const double tol = 1e-9;
    auto in_window = [&](double t) { return t >= spec.t_start - tol && t <= spec.t_end + tol; };

    MeasurementSeries out = clean;
    long k_entry = -1;
    const long shift = std::lround(spec.replay_shift / step);
    for (long k = 0; k < ns; ++k) {
        if (!in_window(clean.times[k])) continue;
        if (k_entry < 0) k_entry = k;
        for (std::size_t c = 0; c < spec.channels.size(); ++c) {
            const int ch = spec.channels[c];
            switch (spec.kind) {
                case AttackKind::integrity:
                    out.values[k][ch] = spec.factors[c] * clean.values[k][ch];
                    break;
                case AttackKind::dos:
                    out.values[k][ch] = clean.values[k_entry][ch];
                    break;
                case AttackKind::replay:
                    if (k - shift < 0) throw ContractViolation("replay reaches before the start of the stream");
                    out.values[k][ch] = clean.values[k - shift][ch];
                    break;
                case AttackKind::none:
                    break;
            }
        }
    }
    return out;
}

MeasurementSeries add_noise(const MeasurementSeries& series, const NoiseSpec& spec) {
    NoiseGenerator gen(spec);
    MeasurementSeries out = series;
    for (auto& v : out.values) v += gen.sample(v.size());
    return out;
}

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::laplace: return "laplace";
        case NoiseKind::cauchy: return "cauchy";
    }
    return "?";
}

std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::none: return "none";
        case AttackKind::integrity: return "integrity";
        case AttackKind::dos: return "dos";
        case AttackKind::replay: return "replay";
    }
    return "?";
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "laplace") return NoiseKind::laplace;
    if (s == "cauchy") return NoiseKind::cauchy;
    throw ConfigError("unknown noise kind '" + s + "'");
}

AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "none" || s == "nominal") return AttackKind::none;
    if (s == "integrity") return AttackKind::integrity;
    if (s == "dos") return AttackKind::dos;
    if (s == "replay") return AttackKind::replay;
    throw ConfigError("unknown attack kind '" + s + "'");
}

}  // namespace dse
