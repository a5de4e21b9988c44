#include "dse/detect_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dse/errors.hpp"

namespace dse {

double innovation_ratio(double y, double yhat, double pyy) {
    if (!(pyy > 0.0)) throw EstimationError("innovation ratio undefined: predicted measurement variance <= 0");
    return (y - yhat) / std::sqrt(pyy);
}

Vec observer_innovation(const SystemCase& sys, const Vec& y, const Vec& xhat, const CMat& Y) {
    return y - h_eval(sys, xhat, Y);
}

RelError rel_error_norm(const Vec& x, const Vec& xhat, double eps_div) {
    if (x.size() != xhat.size()) throw ContractViolation("rel_error_norm: length mismatch");
    double acc = 0.0;
    int excluded = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) <= eps_div) {
            ++excluded;
            continue;
        }
        const double r = (x[i] - xhat[i]) / x[i];
        acc += r * r;
    }
    if (excluded == x.size()) throw EstimationError("relative error undefined: every true component is ~0");
    return {std::sqrt(acc), excluded};
}

DetectionResult flag_compromised(const std::vector<double>& times, const std::vector<Vec>& ratios, double threshold,
                                 double warmup, const std::vector<int>& attacked, double window_start,
                                 double window_end) {
    if (!(threshold > 0.0)) throw ContractViolation("detection threshold must be positive");
    if (times.size() != ratios.size()) throw ContractViolation("flag_compromised: times/ratios length mismatch");
    DetectionResult out;
    long hit = 0, hit_n = 0, fa = 0, fa_n = 0;
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        const Vec& r = ratios[k];
        std::vector<bool> row(r.size());
        for (Eigen::Index j = 0; j < r.size(); ++j) row[j] = std::abs(r[j]) > threshold;
        const double t = times[k];
        if (t >= warmup - 1e-9 && t >= window_start - 1e-9 && t <= window_end + 1e-9) {
            for (Eigen::Index j = 0; j < r.size(); ++j) {
                const bool is_attacked = std::find(attacked.begin(), attacked.end(), j) != attacked.end();
                if (is_attacked) {
                    ++hit_n;
                    hit += row[j];
                } else {
                    ++fa_n;
                    fa += row[j];
                }
            }
        }
        out.flags.push_back(std::move(row));
    }
    out.detection_rate = hit_n ? static_cast<double>(hit) / hit_n : 0.0;
    out.false_alarm_rate = fa_n ? static_cast<double>(fa) / fa_n : 0.0;
    return out;
}

double window_mean(const std::vector<double>& times, const std::vector<double>& series, double t0, double t1) {
    double acc = 0.0;
    int cnt = 0;
    for (std::size_t k = 0; k < times.size() && k < series.size(); ++k)
        if (times[k] >= t0 - 1e-9 && times[k] <= t1 + 1e-9) {
            acc += series[k];
            ++cnt;
        }
    return cnt ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace dse
