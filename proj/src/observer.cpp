#include "dse/observer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "dse/errors.hpp"
#include "dse/sim.hpp"

namespace dse {

using nlohmann::json;

double log_norm(const Mat& h) {
    if (h.rows() != h.cols()) throw ContractViolation("log_norm: matrix must be square");
    const Mat s = 0.5 * (h + h.transpose());
    return Eigen::SelfAdjointEigenSolver<Mat>(s, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

void RegionOfInterest::validate() const {
    if (lower.size() == 0 || lower.size() != upper.size()) throw ContractViolation("region bounds must match in size");
    if (!(lower.array() < upper.array()).all()) throw ContractViolation("region needs lower < upper componentwise");
    if (n_samples < 2) throw ContractViolation("region needs at least 2 samples");
}

namespace {

Vec uniform_in(const RegionOfInterest& d, std::mt19937_64& eng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec x(d.lower.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = d.lower[i] + (d.upper[i] - d.lower[i]) * u(eng);
    return x;
}

}  // namespace

RhoEstimate estimate_rho_jacobian(const MatFn& jacobian, const RegionOfInterest& d, std::uint64_t seed) {
    d.validate();
    auto eng = make_engine(seed, stream::sampling);
    RhoEstimate out{-std::numeric_limits<double>::infinity(), {}, 0};
    out.running_max.reserve(d.n_samples);
    for (int s = 0; s < d.n_samples; ++s) {
        const Vec x = uniform_in(d, eng);
        Mat j;
        try {
            j = jacobian(x);
        } catch (const NumericError&) {
            ++out.skipped;
            continue;
        }
        if (!j.allFinite()) {
            ++out.skipped;
            continue;
        }
        out.rho = std::max(out.rho, log_norm(j));
        out.running_max.push_back(out.rho);
    }
    if (out.running_max.empty()) throw EstimationError("every sample produced a non-finite Jacobian");
    return out;
}

RhoEstimate estimate_rho(const VecFn& phi, const RegionOfInterest& d, std::uint64_t seed) {
    return estimate_rho_jacobian([&](const Vec& x) { return fd_jacobian(phi, x); }, d, seed);
}

MuPhiGrid MuPhiGrid::standard() {
    MuPhiGrid g;
    g.mu.push_back(0.0);
    for (int k = -24; k <= 24; ++k) g.mu.push_back(std::pow(10.0, k / 4.0));
    g.varphi.push_back(0.0);
    for (int j = -12; j <= 12; ++j) {
        const double v = std::pow(10.0, j / 4.0);
        g.varphi.push_back(v);
        g.varphi.push_back(-v);
    }
    return g;
}

std::vector<PairStats> sample_pairs(const VecFn& phi, const RegionOfInterest& d, int n_pairs, std::uint64_t seed) {
    d.validate();
    auto eng = make_engine(seed, stream::sampling);
    std::vector<PairStats> out;
    out.reserve(n_pairs);
    for (int k = 0; k < n_pairs; ++k) {
        const Vec xi = uniform_in(d, eng), xj = uniform_in(d, eng);
        const Vec dp = phi(xi) - phi(xj);
        const Vec dx = xi - xj;
        out.push_back({dp.squaredNorm(), dx.squaredNorm(), dp.dot(dx)});
    }
    return out;
}

bool inner_bound_holds(const std::vector<PairStats>& pairs, double mu, double varphi, double rel_tol) {
    for (const auto& p : pairs) {
        const double rhs = mu * p.dx2 + varphi * p.cross;
        const double scale = p.dphi2 + std::abs(mu * p.dx2) + std::abs(varphi * p.cross);
        if (p.dphi2 > rhs + rel_tol * scale) return false;
    }
    return true;
}

LipschitzConstants estimate_mu_phi(const VecFn& phi, const RegionOfInterest& d, std::uint64_t seed, int n_pairs,
                                   const MuPhiGrid& grid) {
    const auto pairs = sample_pairs(phi, d, n_pairs, seed);
    for (double mu : grid.mu)
        for (double vp : grid.varphi)
            if (inner_bound_holds(pairs, mu, vp)) return {0.0, mu, vp};
    throw EstimationError(fmt::format("no feasible (mu, varphi) on the grid mu in [{:g}, {:g}], varphi in [{:g}, {:g}]",
                                      grid.mu.front(), grid.mu.back(),
                                      *std::min_element(grid.varphi.begin(), grid.varphi.end()),
                                      *std::max_element(grid.varphi.begin(), grid.varphi.end())));
}

Mat assemble_lmi(const Mat& A, const Mat& C, const LipschitzConstants& c, double eps1, double eps2, double sigma,
                 const Mat& P) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || P.rows() != n || P.cols() != n || C.cols() != n)
        throw ContractViolation("assemble_lmi: dimension mismatch");
    const Mat I = Mat::Identity(n, n);
    Mat m(2 * n, 2 * n);
    m.topLeftCorner(n, n) = A.transpose() * P + P * A + (eps1 * c.rho + eps2 * c.mu) * I - sigma * C.transpose() * C;
    m.topRightCorner(n, n) = P + 0.5 * (c.varphi * eps2 - eps1) * I;
    m.bottomLeftCorner(n, n) = m.topRightCorner(n, n).transpose();
    m.bottomRightCorner(n, n) = -eps2 * I;
    return 0.5 * (m + m.transpose());
}

namespace {

struct LmiVars {
    Mat P;
    double e1, e2, sigma;
};

struct LmiEval {
    double smooth;   // tau * log sum exp(lambda / tau)
    double lam_max;
    LmiVars grad;
};

LmiEval evaluate(const Mat& A, const Mat& C, const Mat& CtC, const LipschitzConstants& c, const LmiVars& v,
                 double tau, bool want_grad) {
    const Eigen::Index n = A.rows();
    const Mat m = assemble_lmi(A, C, c, v.e1, v.e2, v.sigma, v.P);
    Eigen::SelfAdjointEigenSolver<Mat> es(m, want_grad ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    const Vec& lam = es.eigenvalues();
    const double top = lam.maxCoeff();
    const Vec w = ((lam.array() - top) / tau).exp().matrix();
    const double z = w.sum();
    LmiEval out{top + tau * std::log(z), top, {}};
    if (!want_grad) return out;
    const Mat g = es.eigenvectors() * (w / z).asDiagonal() * es.eigenvectors().transpose();
    const Mat g11 = g.topLeftCorner(n, n), g12 = g.topRightCorner(n, n), g22 = g.bottomRightCorner(n, n);
    out.grad.P = A * g11 + g11 * A.transpose() + g12 + g12.transpose();
    out.grad.P = 0.5 * (out.grad.P + out.grad.P.transpose());
    out.grad.e1 = c.rho * g11.trace() - g12.trace();
    out.grad.e2 = c.mu * g11.trace() + c.varphi * g12.trace() - g22.trace();
    out.grad.sigma = -(CtC * g11).trace();
    return out;
}

// Euclidean projection onto {P = P^T, P >= floor I, trace(P) = n}.
Mat project_p(const Mat& p, double floor) {
    const Eigen::Index n = p.rows();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (p + p.transpose()));
    const Vec lam = es.eigenvalues();
    auto total = [&](double shift) { return (lam.array() + shift).max(floor).sum(); };
    double lo = floor - lam.maxCoeff(), hi = floor - lam.minCoeff() + static_cast<double>(n);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total(mid) < static_cast<double>(n) ? lo : hi) = mid;
    }
    const Vec proj = (lam.array() + 0.5 * (lo + hi)).max(floor).matrix();
    Mat out = es.eigenvectors() * proj.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

LmiVars project(const LmiVars& v, const LmiSolverOptions& o) {
    return {project_p(v.P, o.p_floor), std::clamp(v.e1, o.scalar_min, o.scalar_max),
            std::clamp(v.e2, o.scalar_min, o.scalar_max), std::clamp(v.sigma, o.scalar_min, o.sigma_max)};
}

LmiVars step(const LmiVars& v, const LmiVars& g, double t) {
    return {v.P - t * g.P, v.e1 - t * g.e1, v.e2 - t * g.e2, v.sigma - t * g.sigma};
}

double inner(const LmiVars& a, const LmiVars& b) {
    return (a.P.array() * b.P.array()).sum() + a.e1 * b.e1 + a.e2 * b.e2 + a.sigma * b.sigma;
}

LmiVars diff(const LmiVars& a, const LmiVars& b) { return {a.P - b.P, a.e1 - b.e1, a.e2 - b.e2, a.sigma - b.sigma}; }

ObserverGain finish(const LmiVars& v, const Mat& C, const LipschitzConstants& c, double lam) {
    ObserverGain g;
    g.P = v.P;
    g.eps1 = v.e1;
    g.eps2 = v.e2;
    g.sigma = v.sigma;
    g.lmi_max_eig = lam;
    g.constants = c;
    g.L = 0.5 * v.sigma * v.P.llt().solve(C.transpose());
    return g;
}

}  // namespace

ObserverGain solve_observer_lmi(const Mat& A, const Mat& C, const LipschitzConstants& consts,
                                const LmiSolverOptions& opts) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || C.cols() != n) throw ContractViolation("solve_observer_lmi: dimension mismatch");
    const Mat CtC = C.transpose() * C;
    LmiVars v = project({Mat::Identity(n, n), 1.0, 1.0, 1.0}, opts);
    LmiVars best = v;
    double best_lam = std::numeric_limits<double>::infinity();
    double t = 1e-2;
    double tau = 0.1;

    for (int it = 0; it < opts.max_iters; ++it) {
        const LmiEval cur = evaluate(A, C, CtC, consts, v, tau, true);
        if (cur.lam_max < best_lam) {
            best_lam = cur.lam_max;
            best = v;
        }
        if (cur.lam_max <= -opts.feas_tol) {
            if (opts.sigma_target <= v.sigma) return finish(v, C, consts, cur.lam_max);
            v.sigma = opts.sigma_target;
            return finish(v, C, consts, evaluate(A, C, CtC, consts, v, tau, false).lam_max);
        }

        // Smoothing width follows the distance to the feasibility boundary.
        const double want_tau = std::clamp(0.1 * std::abs(cur.lam_max), 1e-12, 0.1);
        if (want_tau < tau) {
            tau = want_tau;
            continue;
        }

        bool moved = false;
        while (t > 1e-16) {
            const LmiVars cand = project(step(v, cur.grad, t), opts);
            const LmiVars d = diff(cand, v);
            const double dd = inner(d, d);
            if (dd == 0.0) break;
            const double fc = evaluate(A, C, CtC, consts, cand, tau, false).smooth;
            if (fc <= cur.smooth + inner(cur.grad, d) + 0.5 * dd / t) {
                v = cand;
                moved = true;
                t *= 1.5;
                break;
            }
            t *= 0.5;
        }
        if (!moved) {
            if (tau <= 1e-12) break;
            tau = std::max(1e-12, 0.5 * tau);
            t = 1e-2;
        }
    }
    throw InfeasibleError(fmt::format("LMI infeasible within {} iterations for (rho, mu, varphi) = ({:g}, {:g}, {:g}); "
                                      "best max eigenvalue {:.6e}",
                                      opts.max_iters, consts.rho, consts.mu, consts.varphi, best_lam),
                          best_lam);
}

double verify_gain(const ObserverGain& g, const Mat& A, const Mat& C) {
    const Mat m = assemble_lmi(A, C, g.constants, g.eps1, g.eps2, g.sigma, g.P);
    const double lam = Eigen::SelfAdjointEigenSolver<Mat>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (!(lam < 0.0)) throw NumericError(fmt::format("gain certificate fails: LMI max eigenvalue {:.3e}", lam));
    if (!(g.eps1 > 0.0 && g.eps2 > 0.0 && g.sigma > 0.0)) throw NumericError("gain has non-positive multipliers");
    const Mat expect = 0.5 * g.sigma * g.P.llt().solve(C.transpose());
    const double err = (g.L - expect).lpNorm<Eigen::Infinity>();
    if (!(err < 1e-10)) throw NumericError(fmt::format("gain L deviates from (sigma/2) P^-1 C^T by {:.3e}", err));
    return lam;
}

namespace {

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Mat mat_from_json(const json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return Mat();
    Mat m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) throw ConfigError("ragged matrix in gain file");
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

}  // namespace

json gain_to_json(const ObserverGain& g) {
    return {{"L", mat_to_json(g.L)},
            {"P", mat_to_json(g.P)},
            {"eps1", g.eps1},
            {"eps2", g.eps2},
            {"sigma", g.sigma},
            {"lmi_max_eig", g.lmi_max_eig},
            {"constants", {{"rho", g.constants.rho}, {"mu", g.constants.mu}, {"varphi", g.constants.varphi}}}};
}

ObserverGain gain_from_json(const json& j) {
    try {
        ObserverGain g;
        g.L = mat_from_json(j.at("L"));
        g.P = mat_from_json(j.at("P"));
        g.eps1 = j.at("eps1").get<double>();
        g.eps2 = j.at("eps2").get<double>();
        g.sigma = j.at("sigma").get<double>();
        g.lmi_max_eig = j.at("lmi_max_eig").get<double>();
        const auto& c = j.at("constants");
        g.constants = {c.at("rho").get<double>(), c.at("mu").get<double>(), c.at("varphi").get<double>()};
        return g;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("gain file: ") + e.what());
    }
}

void save_gain(const ObserverGain& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << gain_to_json(g).dump(2) << '\n';
}

ObserverGain load_gain(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open gain file " + path.string());
    try {
        return gain_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ConfigError("gain file " + path.string() + ": " + e.what());
    }
}

Mat synthesis_output_matrix(const SystemCase& sys) { return jacobian_h(sys, sys.x0, sys.y_post); }

Vec observer_step(const SystemCase& sys, const LinearSplit& split, const Vec& xhat, const Vec& u, const Vec& y,
                  const Mat& L, const CMat& Y, double dt, int steps) {
    if (steps < 1) throw ContractViolation("observer_step: need at least one sub-step");
    const Vec bu = split.B * u;
    const TimeDerivative f = [&](double, const Vec& x) -> Vec {
        return split.A * x + bu + split.phi(x, Y) + L * (y - h_eval(sys, x, Y));
    };
    const double h = dt / steps;
    Vec x = xhat;
    for (int s = 0; s < steps; ++s) x = rk4_step(f, s * h, x, h);
    return x;
}

}  // namespace dse
