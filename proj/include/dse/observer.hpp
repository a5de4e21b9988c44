#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "dse/powermodel.hpp"
#include "json.hpp"

namespace dse {

using VecFn = std::function<Vec(const Vec&)>;

// beta(H) = lambda_max((H + H^T) / 2)
double log_norm(const Mat& h);

struct RegionOfInterest {
    Vec lower;
    Vec upper;
    int n_samples = 1000;

    void validate() const;
};

struct LipschitzConstants {
    double rho = 0.0;
    double mu = 0.0;
    double varphi = 0.0;
};

struct RhoEstimate {
    double rho;
    std::vector<double> running_max;  // after each accepted sample
    int skipped = 0;
};

using MatFn = std::function<Mat(const Vec&)>;

// Running max of log_norm(J) over uniform samples of D. The first form uses
// the central-difference Jacobian of phi.
RhoEstimate estimate_rho(const VecFn& phi, const RegionOfInterest& d, std::uint64_t seed);
RhoEstimate estimate_rho_jacobian(const MatFn& jacobian, const RegionOfInterest& d, std::uint64_t seed);

struct MuPhiGrid {
    std::vector<double> mu;      // ascending
    std::vector<double> varphi;  // search order
    static MuPhiGrid standard();  // mu in {0} u [1e-6, 1e6], varphi in [-1e3, 1e3]
};

struct PairStats {
    double dphi2;     // |phi(xi) - phi(xj)|^2
    double dx2;       // |xi - xj|^2
    double cross;     // <phi(xi) - phi(xj), xi - xj>
};

std::vector<PairStats> sample_pairs(const VecFn& phi, const RegionOfInterest& d, int n_pairs, std::uint64_t seed);

// Quadratic inner-boundedness: dphi2 <= mu dx2 + varphi cross, with a
// relative slack for rounding.
bool inner_bound_holds(const std::vector<PairStats>& pairs, double mu, double varphi, double rel_tol = 1e-12);

// Smallest grid mu admitting some grid varphi; among those, the first
// varphi in grid order. EstimationError if the grid has no feasible pair.
LipschitzConstants estimate_mu_phi(const VecFn& phi, const RegionOfInterest& d, std::uint64_t seed, int n_pairs,
                                   const MuPhiGrid& grid = MuPhiGrid::standard());

// [[A^T P + P A + (e1 rho + e2 mu) I - sigma C^T C,  P + ((varphi e2 - e1)/2) I],
//  [                                       (sym),    -e2 I                    ]]
Mat assemble_lmi(const Mat& A, const Mat& C, const LipschitzConstants& c, double eps1, double eps2, double sigma,
                 const Mat& P);

struct LmiSolverOptions {
    int max_iters = 20000;
    double feas_tol = 1e-8;     // required margin, with trace(P) = n
    double p_floor = 1e-3;      // min eigenvalue of P
    double scalar_min = 1e-6;
    double scalar_max = 1e6;
    double sigma_max = 10.0;
    // The block is non-increasing in sigma (it enters as -sigma C^T C), so a
    // certified point stays certified when sigma is raised to this value.
    double sigma_target = 30.0;
};

struct ObserverGain {
    Mat L;
    Mat P;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double sigma = 0.0;
    double lmi_max_eig = 0.0;
    LipschitzConstants constants;
};

ObserverGain solve_observer_lmi(const Mat& A, const Mat& C, const LipschitzConstants& consts,
                                const LmiSolverOptions& opts = {});

// Independent eigensolve of the LMI at the stored variables; throws
// NumericError if the certificate or the gain formula does not hold.
double verify_gain(const ObserverGain& g, const Mat& A, const Mat& C);

nlohmann::json gain_to_json(const ObserverGain& g);
ObserverGain gain_from_json(const nlohmann::json& j);
void save_gain(const ObserverGain& g, const std::filesystem::path& path);
ObserverGain load_gain(const std::filesystem::path& path);

// Synthesis linearization: C = dh/dx at x0 with the post-fault network.
Mat synthesis_output_matrix(const SystemCase& sys);

// One sample interval of xhat' = A xhat + B u + phi(xhat) + L (y - h(xhat)),
// y held constant, RK4 with `steps` sub-steps.
Vec observer_step(const SystemCase& sys, const LinearSplit& split, const Vec& xhat, const Vec& u, const Vec& y,
                  const Mat& L, const CMat& Y, double dt, int steps);

}  // namespace dse
