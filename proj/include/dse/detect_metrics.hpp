#pragma once

#include <vector>

#include "dse/powermodel.hpp"

namespace dse {

// (y - yhat) / sqrt(pyy); pyy <= 0 is an EstimationError.
double innovation_ratio(double y, double yhat, double pyy);

Vec observer_innovation(const SystemCase& sys, const Vec& y, const Vec& xhat, const CMat& Y);

struct RelError {
    double value;
    int excluded;  // components with |x_i| <= eps_div
};

// || (x - xhat) / x ||_2 over components with |x_i| > eps_div.
RelError rel_error_norm(const Vec& x, const Vec& xhat, double eps_div = 1e-9);

struct DetectionResult {
    std::vector<std::vector<bool>> flags;  // [step][channel]
    double detection_rate = 0.0;
    double false_alarm_rate = 0.0;
};

// A channel is flagged at step k when |ratio| > threshold. Rates count
// steps with t >= warmup (and inside the attack window when one is given)
// over attacked and clean channels respectively.
DetectionResult flag_compromised(const std::vector<double>& times, const std::vector<Vec>& ratios, double threshold,
                                 double warmup, const std::vector<int>& attacked, double window_start = -1e300,
                                 double window_end = 1e300);

struct RunMetrics {
    std::vector<double> rel_err;
    double final_err = 0.0;
    double mean_err = 0.0;
    double detection_rate = 0.0;
    double false_alarm_rate = 0.0;
    double wall_time = 0.0;
};

// Mean of series[k] over times[k] in [t0, t1]; NaN when the window is empty.
double window_mean(const std::vector<double>& times, const std::vector<double>& series, double t0, double t1);

}  // namespace dse
