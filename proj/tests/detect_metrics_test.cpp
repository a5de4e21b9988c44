#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dse/detect_metrics.hpp"
#include "dse/errors.hpp"
#include "test_support.hpp"

using namespace dse;
using dse::testing::Gen;
using dse::testing::shipped_case;

namespace {

std::vector<double> grid(int n, double dt) {
    std::vector<double> t(n);
    for (int k = 0; k < n; ++k) t[k] = k * dt;
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// innovation_ratio

TEST(InnovationRatio, Examples) {
    EXPECT_NEAR(innovation_ratio(1.1, 1.0, 0.01), 1.0, 1e-12);
    EXPECT_EQ(innovation_ratio(0.7, 0.7, 0.3), 0.0);
    EXPECT_NEAR(innovation_ratio(0.0, 1.0, 4.0), -0.5, 1e-15);
}

TEST(InnovationRatio, ScaleEquivariant) {
    Gen g(1);
    for (int i = 0; i < 200; ++i) {
        const double y = g.uniform(-2, 2), yh = g.uniform(-2, 2), p = g.uniform(1e-6, 3), c = g.uniform(0.01, 100);
        EXPECT_NEAR(innovation_ratio(c * y, c * yh, c * c * p), innovation_ratio(y, yh, p),
                    1e-10 * (1 + std::abs(innovation_ratio(y, yh, p))));
    }
}

TEST(InnovationRatio, CollapsedCovarianceIsError) {
    EXPECT_THROW(innovation_ratio(1.0, 0.0, 0.0), EstimationError);
    EXPECT_THROW(innovation_ratio(1.0, 0.0, -1e-3), EstimationError);
    EXPECT_THROW(innovation_ratio(1.0, 0.0, NAN), EstimationError);
}

// ---------------------------------------------------------------------------
// observer_innovation

TEST(ObserverInnovation, ZeroAtMatchingState) {
    const auto& sys = shipped_case();
    const Vec y = h_eval(sys, sys.x0, sys.y_post);
    EXPECT_EQ(observer_innovation(sys, y, sys.x0, sys.y_post), Vec::Zero(12));
}

TEST(ObserverInnovation, ScaledChannelResidual) {
    const auto& sys = shipped_case();
    const Vec clean = h_eval(sys, sys.x0, sys.y_post);
    Vec attacked = clean;
    attacked[0] *= 0.6;
    attacked[2] /= 0.6;
    const Vec r = observer_innovation(sys, attacked, sys.x0, sys.y_post);
    EXPECT_NEAR(std::abs(r[0]), 0.4 * std::abs(clean[0]), 1e-15);
    EXPECT_NEAR(std::abs(r[2]), (1 / 0.6 - 1) * std::abs(clean[2]), 1e-15);
    EXPECT_EQ(r[1], 0.0);
}

// ---------------------------------------------------------------------------
// rel_error_norm

TEST(RelErrorNorm, Examples) {
    EXPECT_EQ(rel_error_norm(Vec::Ones(3), Vec::Ones(3)).value, 0.0);
    Vec x(2), xh(2);
    x << 1, 1;
    xh << 1.1, 0.9;
    EXPECT_NEAR(rel_error_norm(x, xh).value, std::sqrt(0.02), 1e-12);
}

TEST(RelErrorNorm, DoubledComponentsContributeOne) {
    const auto& sys = shipped_case();
    Vec xh = 2.0 * sys.x0;
    for (int i = 0; i < sys.m(); ++i) xh[idx::omega(i)] = sys.x0[idx::omega(i)];
    const auto r = rel_error_norm(sys.x0, xh);
    const int nonzero = static_cast<int>((sys.x0.array().abs() > 1e-9).count()) - sys.m();
    EXPECT_NEAR(r.value, std::sqrt(static_cast<double>(nonzero)), 1e-12);
}

TEST(RelErrorNorm, ExcludesNearZeroComponents) {
    Vec x(3), xh(3);
    x << 1.0, 0.0, 1e-12;
    xh << 1.5, 5.0, 7.0;
    const auto r = rel_error_norm(x, xh);
    EXPECT_EQ(r.excluded, 2);
    EXPECT_NEAR(r.value, 0.5, 1e-15);
    EXPECT_THROW(rel_error_norm(Vec::Zero(3), Vec::Ones(3)), EstimationError);
    EXPECT_THROW(rel_error_norm(Vec::Ones(3), Vec::Ones(2)), ContractViolation);
}

TEST(RelErrorNorm, PermutationInvariantAndZeroIffEqual) {
    Gen g(2);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 9;
        const Vec x = g.vec(n, 0.5, 3.0);
        Vec xh = x + 0.1 * g.vec(n, -1, 1);
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), g.engine());
        Vec px(n), pxh(n);
        for (int i = 0; i < n; ++i) {
            px[i] = x[perm[i]];
            pxh[i] = xh[perm[i]];
        }
        EXPECT_NEAR(rel_error_norm(px, pxh).value, rel_error_norm(x, xh).value, 1e-14);
        EXPECT_GT(rel_error_norm(x, xh).value, 0.0);
        EXPECT_EQ(rel_error_norm(x, x).value, 0.0);
    }
}

// ---------------------------------------------------------------------------
// flag_compromised

TEST(FlagCompromised, ZeroRatiosRaiseNothing) {
    const auto t = grid(100, 0.1);
    const std::vector<Vec> r(100, Vec::Zero(4));
    const auto d = flag_compromised(t, r, 3.0, 2.0, {0, 1});
    EXPECT_EQ(d.detection_rate, 0.0);
    EXPECT_EQ(d.false_alarm_rate, 0.0);
    for (const auto& row : d.flags)
        for (bool f : row) EXPECT_FALSE(f);
}

TEST(FlagCompromised, TinyThresholdFlagsEverything) {
    Gen g(3);
    const auto t = grid(50, 0.1);
    std::vector<Vec> r;
    for (int k = 0; k < 50; ++k) r.push_back(g.vec(3, 0.01, 1.0));
    const auto d = flag_compromised(t, r, 1e-300, 0.0, {2});
    EXPECT_EQ(d.detection_rate, 1.0);
    EXPECT_EQ(d.false_alarm_rate, 1.0);
}

TEST(FlagCompromised, CountsOnlyAfterWarmupAndInsideWindow) {
    const auto t = grid(11, 1.0);  // 0..10 s
    std::vector<Vec> r(11, Vec::Zero(2));
    for (int k = 0; k < 11; ++k) r[k][0] = (k >= 3 && k <= 6) ? 5.0 : 0.0;
    r[1][1] = 10.0;  // inside warmup, not counted
    r[8][1] = 10.0;  // outside window, not counted
    const auto d = flag_compromised(t, r, 3.0, 2.0, {0}, 3.0, 6.0);
    EXPECT_EQ(d.detection_rate, 1.0);
    EXPECT_EQ(d.false_alarm_rate, 0.0);
    EXPECT_TRUE(d.flags[1][1]);
    const auto whole = flag_compromised(t, r, 3.0, 2.0, {0});
    EXPECT_NEAR(whole.detection_rate, 4.0 / 9.0, 1e-15);
    EXPECT_NEAR(whole.false_alarm_rate, 1.0 / 9.0, 1e-15);
}

TEST(FlagCompromised, RatesMonotoneInThreshold) {
    Gen g(4);
    const auto t = grid(200, 0.05);
    std::vector<Vec> r;
    for (int k = 0; k < 200; ++k) {
        Vec v(6);
        for (int j = 0; j < 6; ++j) v[j] = (j < 2 ? 3.0 : 1.0) * g.normal();
        r.push_back(v);
    }
    double last_det = 2.0, last_fa = 2.0;
    for (double thr = 0.1; thr < 10.0; thr *= 1.3) {
        const auto d = flag_compromised(t, r, thr, 1.0, {0, 1});
        EXPECT_LE(d.detection_rate, last_det);
        EXPECT_LE(d.false_alarm_rate, last_fa);
        EXPECT_GE(d.detection_rate, 0.0);
        EXPECT_LE(d.detection_rate, 1.0);
        last_det = d.detection_rate;
        last_fa = d.false_alarm_rate;
    }
}

TEST(FlagCompromised, Preconditions) {
    EXPECT_THROW(flag_compromised({0.0}, {Vec::Zero(1)}, 0.0, 0.0, {}), ContractViolation);
    EXPECT_THROW(flag_compromised({0.0, 1.0}, {Vec::Zero(1)}, 1.0, 0.0, {}), ContractViolation);
}

// ---------------------------------------------------------------------------
// window_mean

TEST(WindowMean, InclusiveBounds) {
    const auto t = grid(11, 1.0);
    std::vector<double> s(11);
    std::iota(s.begin(), s.end(), 0.0);
    EXPECT_DOUBLE_EQ(window_mean(t, s, 5.0, 10.0), 7.5);
    EXPECT_DOUBLE_EQ(window_mean(t, s, 0.0, 0.0), 0.0);
    EXPECT_TRUE(std::isnan(window_mean(t, s, 20.0, 30.0)));
}
