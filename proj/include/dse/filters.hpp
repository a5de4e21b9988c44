#pragma once

#include <functional>
#include <limits>

#include "dse/powermodel.hpp"
#include "dse/sim.hpp"

namespace dse {

struct GaussianBelief {
    Vec mean;
    Mat cov;
};

struct SqrtBelief {
    Vec mean;
    Mat sqrt_factor;  // lower triangular, S S^T = cov
};

struct FilterConfig {
    double ut_kappa = std::numeric_limits<double>::quiet_NaN();  // NaN: 3 - n
    bool scaled_ut = false;
    double ut_alpha = 1e-3;
    double ut_beta = 2.0;
    Mat Q;
    Mat R;
    double eig_floor = 1e-12;

    double kappa(Eigen::Index n) const { return std::isnan(ut_kappa) ? 3.0 - static_cast<double>(n) : ut_kappa; }
};

// Discrete-time model seen by the filters. transition(x, k) maps the
// estimate at sample k to sample k + 1; measure(x, k) predicts y_k.
// The Jacobian hooks are optional; EKF falls back to finite differences.
struct DiscreteModel {
    std::function<Vec(const Vec&, int)> transition;
    std::function<Vec(const Vec&, int)> measure;
    std::function<Mat(const Vec&, int)> transition_jacobian;
    std::function<Mat(const Vec&, int)> measure_jacobian;
};

// RK4 propagation of f(x, u, Y) over dt using `steps` equal sub-steps.
Vec discrete_f(const SystemCase& sys, const Vec& x, const Vec& u, const CMat& y, double dt, int steps = 1);

// Estimator-side model: u fixed at u0, Y_pre inside the wrong-admittance
// window and Y_post afterwards, transition Jacobian I + dt * df/dx.
DiscreteModel make_estimator_model(const SystemCase& sys, const ScenarioSchedule& sched);

struct StepResult {
    GaussianBelief belief;
    Vec predicted_measurement;
    Vec innovation;
    Vec pyy_diag;
};

struct SqrtStepResult {
    SqrtBelief belief;
    Vec predicted_measurement;
    Vec innovation;
    Vec pyy_diag;
};

// Symmetrize and raise eigenvalues below `floor` to `floor`.
Mat repair_covariance(const Mat& cov, double floor);
// Lower Cholesky factor, retried once after repair; NumericError if both fail.
Mat covariance_sqrt(const Mat& cov, double floor);

struct PointSet {
    Mat points;  // n x N
    Vec wm;
    Vec wc;
};

PointSet ut_sigma_points(const GaussianBelief& b, const FilterConfig& cfg);
PointSet ut_sigma_points_from_sqrt(const Vec& mean, const Mat& s, const FilterConfig& cfg);
PointSet cubature_points(const GaussianBelief& b, double floor = 1e-12);
PointSet cubature_points_from_sqrt(const Vec& mean, const Mat& s);

// Each step predicts from sample k - 1 to k and updates with y_k.
StepResult ekf_step(const GaussianBelief& b, const Vec& y, int k, const DiscreteModel& model, const FilterConfig& cfg);
StepResult ukf_step(const GaussianBelief& b, const Vec& y, int k, const DiscreteModel& model, const FilterConfig& cfg);
SqrtStepResult srukf_step(const SqrtBelief& b, const Vec& y, int k, const DiscreteModel& model, const FilterConfig& cfg);
StepResult ckf_step(const GaussianBelief& b, const Vec& y, int k, const DiscreteModel& model, const FilterConfig& cfg);

// Rank-1 update of a lower Cholesky factor: L L^T + sign * v v^T.
// Returns false (L unspecified) when a downdate loses positive definiteness.
bool cholupdate(Mat& L, Vec v, double sign);

}  // namespace dse
