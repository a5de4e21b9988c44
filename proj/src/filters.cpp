#include "dse/filters.hpp"

#include <cmath>

#include "dse/errors.hpp"

namespace dse {

Vec discrete_f(const SystemCase& sys, const Vec& x, const Vec& u, const CMat& y, double dt, int steps) {
    if (dt == 0.0) return x;
    if (steps < 1) throw ContractViolation("discrete_f: need at least one sub-step");
    const TimeDerivative f = [&](double, const Vec& z) { return f_eval(sys, z, u, y); };
    const double h = dt / steps;
    Vec out = x;
    for (int s = 0; s < steps; ++s) out = rk4_step(f, s * h, out, h);
    return out;
}

DiscreteModel make_estimator_model(const SystemCase& sys, const ScenarioSchedule& sched) {
    auto admittance = [sys, sched](int k) -> const CMat& {
        return sched.estimator_uses_pre(k) ? sys.y_pre : sys.y_post;
    };
    DiscreteModel m;
    m.transition = [sys, sched, admittance](const Vec& x, int k) {
        return discrete_f(sys, x, sys.u0, admittance(k), sched.sample_dt(), sched.steps_per_sample);
    };
    m.transition_jacobian = [sys, sched, admittance](const Vec& x, int k) -> Mat {
        return Mat::Identity(x.size(), x.size()) + sched.sample_dt() * jacobian_f(sys, x, sys.u0, admittance(k));
    };
    m.measure = [sys, admittance](const Vec& x, int k) { return h_eval(sys, x, admittance(k)); };
    m.measure_jacobian = [sys, admittance](const Vec& x, int k) { return jacobian_h(sys, x, admittance(k)); };
    return m;
}

Mat repair_covariance(const Mat& cov, double floor) {
    if (!cov.allFinite()) throw NumericError("covariance has non-finite entries");
    Mat sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
    if (es.eigenvalues().minCoeff() >= floor) return sym;
    const Vec lam = es.eigenvalues().cwiseMax(floor);
    sym = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (sym + sym.transpose());
}

Mat covariance_sqrt(const Mat& cov, double floor) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) return llt.matrixL();
    Eigen::LLT<Mat> retry(repair_covariance(cov, floor));
    if (retry.info() != Eigen::Success) throw NumericError("covariance is not positive definite after repair");
    return retry.matrixL();
}

namespace {

// Symmetric square root that tolerates singular PSD input (e.g. Q = 0).
Mat psd_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

double min_eig(const Mat& a) {
    return Eigen::SelfAdjointEigenSolver<Mat>(a, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

// spread + noise when that is safely positive definite; otherwise the spread
// (sample-point) part alone is clipped to PSD before the noise is added back.
Mat moment_repair(const Mat& spread, const Mat& noise, double floor) {
    const Mat full = 0.5 * (spread + spread.transpose()) + 0.5 * (noise + noise.transpose());
    if (!full.allFinite()) throw NumericError("covariance has non-finite entries");
    if (min_eig(full) >= floor) return full;
    return repair_covariance(repair_covariance(spread, 0.0) + noise, floor);
}

// Lower factor of M M^T via QR of M^T, with a non-negative diagonal.
Mat tria(const Mat& m) {
    Eigen::HouseholderQR<Mat> qr(m.transpose());
    const Eigen::Index n = m.rows();
    Mat r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    Mat s = r.transpose();
    for (Eigen::Index j = 0; j < n; ++j)
        if (s(j, j) < 0.0) s.col(j) = -s.col(j);
    return s;
}

void weights_ut(Eigen::Index n, const FilterConfig& cfg, double& lambda, Vec& wm, Vec& wc) {
    const double nn = static_cast<double>(n);
    const double kappa = cfg.kappa(n);
    lambda = cfg.scaled_ut ? cfg.ut_alpha * cfg.ut_alpha * (nn + kappa) - nn : kappa;
    if (!(nn + lambda > 0.0)) throw ContractViolation("unscented transform needs n + lambda > 0");
    wm = Vec::Constant(2 * n + 1, 1.0 / (2.0 * (nn + lambda)));
    wm[0] = lambda / (nn + lambda);
    wc = wm;
    if (cfg.scaled_ut) wc[0] += 1.0 - cfg.ut_alpha * cfg.ut_alpha + cfg.ut_beta;
}

struct Moments {
    Vec mean;
    Mat cov;
};

Mat propagate(const Mat& pts, const std::function<Vec(const Vec&)>& fn) {
    Mat out;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        const Vec v = fn(pts.col(i));
        if (i == 0) out.resize(v.size(), pts.cols());
        out.col(i) = v;
    }
    return out;
}

Moments weighted_moments(const Mat& pts, const Vec& wm, const Vec& wc) {
    Moments mo{pts * wm, Mat()};
    const Mat d = pts.colwise() - mo.mean;
    mo.cov = d * wc.asDiagonal() * d.transpose();
    return mo;
}

Mat cross_cov(const Mat& xp, const Vec& xm, const Mat& yp, const Vec& ym, const Vec& wc) {
    return (xp.colwise() - xm) * wc.asDiagonal() * (yp.colwise() - ym).transpose();
}

Mat innovation_gain(const Mat& pxy, const Mat& pyy) {
    Eigen::LLT<Mat> llt(pyy);
    if (llt.info() != Eigen::Success) throw NumericError("innovation covariance is not positive definite");
    return llt.solve(pxy.transpose()).transpose();
}

using PointGen = std::function<PointSet(const GaussianBelief&)>;

StepResult sigma_point_step(const GaussianBelief& b, const Vec& y, int k, const DiscreteModel& model,
                            const FilterConfig& cfg, const PointGen& gen) {
    const PointSet prior = gen(b);
    const Mat xp = propagate(prior.points, [&](const Vec& x) { return model.transition(x, k - 1); });
    Moments pred = weighted_moments(xp, prior.wm, prior.wc);
    pred.cov = moment_repair(pred.cov, cfg.Q, cfg.eig_floor);

    const PointSet mid = gen({pred.mean, pred.cov});
    const Mat yp = propagate(mid.points, [&](const Vec& x) { return model.measure(x, k); });
    Moments meas = weighted_moments(yp, mid.wm, mid.wc);
    meas.cov = moment_repair(meas.cov, cfg.R, cfg.eig_floor);
    const Mat pxy = cross_cov(mid.points, pred.mean, yp, meas.mean, mid.wc);
    const Mat gain = innovation_gain(pxy, meas.cov);

    StepResult r;
    r.predicted_measurement = meas.mean;
    r.innovation = y - meas.mean;
    r.pyy_diag = meas.cov.diagonal();
    r.belief.mean = pred.mean + gain * r.innovation;
    r.belief.cov = repair_covariance(pred.cov - gain * meas.cov * gain.transpose(), cfg.eig_floor);
    return r;
}

}  // namespace

PointSet ut_sigma_points_from_sqrt(const Vec& mean, const Mat& s, const FilterConfig& cfg) {
    const Eigen::Index n = mean.size();
    PointSet ps;
    double lambda = 0.0;
    weights_ut(n, cfg, lambda, ps.wm, ps.wc);
    const double c = std::sqrt(static_cast<double>(n) + lambda);
    ps.points.resize(n, 2 * n + 1);
    ps.points.col(0) = mean;
    for (Eigen::Index i = 0; i < n; ++i) {
        ps.points.col(1 + i) = mean + c * s.col(i);
        ps.points.col(1 + n + i) = mean - c * s.col(i);
    }
    return ps;
}

PointSet ut_sigma_points(const GaussianBelief& b, const FilterConfig& cfg) {
    return ut_sigma_points_from_sqrt(b.mean, covariance_sqrt(b.cov, cfg.eig_floor), cfg);
}

PointSet cubature_points_from_sqrt(const Vec& mean, const Mat& s) {
    const Eigen::Index n = mean.size();
    const double c = std::sqrt(static_cast<double>(n));
    PointSet ps;
    ps.points.resize(n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ps.points.col(i) = mean + c * s.col(i);
        ps.points.col(n + i) = mean - c * s.col(i);
    }
    ps.wm = Vec::Constant(2 * n, 1.0 / (2.0 * static_cast<double>(n)));
    ps.wc = ps.wm;
    return ps;
}

PointSet cubature_points(const GaussianBelief& b, double floor) {
    return cubature_points_from_sqrt(b.mean, covariance_sqrt(b.cov, floor));
}

StepResult ekf_step(const GaussianBelief& b, const Vec& y, int k, const DiscreteModel& model, const FilterConfig& cfg) {
    auto fk = [&](const Vec& x) { return model.transition(x, k - 1); };
    const Vec xm = fk(b.mean);
    const Mat F = model.transition_jacobian ? model.transition_jacobian(b.mean, k - 1) : fd_jacobian(fk, b.mean);
    const Mat pm = repair_covariance(F * b.cov * F.transpose() + cfg.Q, cfg.eig_floor);

    auto hk = [&](const Vec& x) { return model.measure(x, k); };
    const Vec ym = hk(xm);
    const Mat H = model.measure_jacobian ? model.measure_jacobian(xm, k) : fd_jacobian(hk, xm);
    const Mat pyy = H * pm * H.transpose() + cfg.R;
    const Mat gain = innovation_gain(pm * H.transpose(), pyy);

    StepResult r;
    r.predicted_measurement = ym;
    r.innovation = y - ym;
    r.pyy_diag = pyy.diagonal();
    r.belief.mean = xm + gain * r.innovation;
    const Mat ikh = Mat::Identity(xm.size(), xm.size()) - gain * H;
    r.belief.cov = repair_covariance(ikh * pm * ikh.transpose() + gain * cfg.R * gain.transpose(), cfg.eig_floor);
    return r;
}

StepResult ukf_step(const GaussianBelief& b, const Vec& y, int k, const DiscreteModel& model, const FilterConfig& cfg) {
    return sigma_point_step(b, y, k, model, cfg, [&](const GaussianBelief& g) { return ut_sigma_points(g, cfg); });
}

StepResult ckf_step(const GaussianBelief& b, const Vec& y, int k, const DiscreteModel& model, const FilterConfig& cfg) {
    return sigma_point_step(b, y, k, model, cfg,
                            [&](const GaussianBelief& g) { return cubature_points(g, cfg.eig_floor); });
}

bool cholupdate(Mat& L, Vec v, double sign) {
    const Eigen::Index n = L.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double lkk = L(k, k);
        if (!(lkk > 0.0)) return false;
        const double r2 = lkk * lkk + sign * v[k] * v[k];
        if (!(r2 > 0.0) || !std::isfinite(r2)) return false;
        const double r = std::sqrt(r2);
        const double c = r / lkk, s = v[k] / lkk;
        L(k, k) = r;
        for (Eigen::Index i = k + 1; i < n; ++i) {
            L(i, k) = (L(i, k) + sign * s * v[i]) / c;
            v[i] = c * v[i] - s * L(i, k);
        }
    }
    return true;
}

namespace {

// Factor of sum_i w_i d_i d_i^T + noise; column 0 of `dev` carries the
// (possibly negative) center weight. Falls back to moment_repair when the
// rank-1 correction loses definiteness.
Mat sqrt_moments(const Mat& dev, const Vec& wc, const Mat& noise, double floor) {
    const Eigen::Index n = dev.rows(), np = dev.cols();
    Mat comp(n, np - 1 + n);
    for (Eigen::Index i = 1; i < np; ++i) comp.col(i - 1) = std::sqrt(wc[i]) * dev.col(i);
    comp.rightCols(n) = psd_sqrt(noise);
    Mat s = tria(comp);
    const double sign = wc[0] >= 0.0 ? 1.0 : -1.0;
    if (cholupdate(s, std::sqrt(std::abs(wc[0])) * dev.col(0), sign) && s.diagonal().minCoeff() > 0.0 &&
        s.diagonal().array().square().minCoeff() >= floor)
        return s;
    const Mat spread = dev * wc.asDiagonal() * dev.transpose();
    return covariance_sqrt(moment_repair(spread, noise, floor), floor);
}

}  // namespace

SqrtStepResult srukf_step(const SqrtBelief& b, const Vec& y, int k, const DiscreteModel& model,
                          const FilterConfig& cfg) {
    const PointSet prior = ut_sigma_points_from_sqrt(b.mean, b.sqrt_factor, cfg);
    const Mat xp = propagate(prior.points, [&](const Vec& x) { return model.transition(x, k - 1); });
    const Vec xm = xp * prior.wm;
    const Mat sx = sqrt_moments(xp.colwise() - xm, prior.wc, cfg.Q, cfg.eig_floor);

    const PointSet mid = ut_sigma_points_from_sqrt(xm, sx, cfg);
    const Mat yp = propagate(mid.points, [&](const Vec& x) { return model.measure(x, k); });
    const Vec ym = yp * mid.wm;
    const Mat sy = sqrt_moments(yp.colwise() - ym, mid.wc, cfg.R, cfg.eig_floor);
    const Mat pxy = cross_cov(mid.points, xm, yp, ym, mid.wc);

    // K = Pxy (Sy Sy^T)^-1
    const auto syl = sy.triangularView<Eigen::Lower>();
    const Mat gain = syl.transpose().solve(syl.solve(pxy.transpose())).transpose();

    SqrtStepResult r;
    r.predicted_measurement = ym;
    r.innovation = y - ym;
    r.pyy_diag = sy.rowwise().squaredNorm();
    r.belief.mean = xm + gain * r.innovation;
    const Mat u = gain * sy;
    Mat s = sx;
    bool ok = true;
    for (Eigen::Index j = 0; j < u.cols() && ok; ++j) ok = cholupdate(s, u.col(j), -1.0);
    if (ok && s.diagonal().minCoeff() * s.diagonal().minCoeff() >= cfg.eig_floor) {
        r.belief.sqrt_factor = s;
    } else {
        const Mat full = sx * sx.transpose() - u * u.transpose();
        r.belief.sqrt_factor = covariance_sqrt(repair_covariance(full, cfg.eig_floor), cfg.eig_floor);
    }
    return r;
}

}  // namespace dse
