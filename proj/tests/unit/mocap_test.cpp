#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "flowbots/actuator.hpp"
#include "flowbots/errors.hpp"
#include "flowbots/mocap.hpp"

namespace flowbots::mocap {
namespace {

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::vector<Point> arc_points(double cx, double cy, double r, const std::vector<double>& degrees) {
    std::vector<Point> p;
    for (double d : degrees) {
        const double a = d * std::numbers::pi / 180.0;
        p.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return p;
}

// Element (2,2) of the inverse of a symmetric 3x3 matrix, by cofactors.
double inverse_22(const double m[3][3]) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    return (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
}

// Linearised standard deviation of the fitted radius for i.i.d. noise sigma
// on both coordinates of points at the given angles.
double radius_sigma(const std::vector<double>& degrees, double sigma) {
    double jtj[3][3] = {};
    for (double d : degrees) {
        const double a = d * std::numbers::pi / 180.0;
        const double row[3] = {-std::cos(a), -std::sin(a), -1.0};
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) jtj[i][k] += row[i] * row[k];
        }
    }
    return sigma * std::sqrt(inverse_22(jtj));
}

CurvatureSeries sampled(double rate, double duration, double (*f)(double)) {
    CurvatureSeries s;
    s.sample_rate = rate;
    const auto n = static_cast<int>(std::lround(duration * rate));
    for (int i = 0; i <= n; ++i) {
        s.t.push_back(i / rate);
        s.curvature.push_back(f(i / rate));
    }
    return s;
}

// ---------------------------------------------------------------------------
// fit_arc

TEST(FitArc, ExactQuarterCircle) {
    const auto p = arc_points(0.0, 0.0, 50.0, {0, 30, 60, 90});
    const auto fit = fit_arc(p);
    EXPECT_FALSE(fit.degenerate);
    EXPECT_NEAR(fit.radius, 50.0, 1e-6);
    EXPECT_NEAR(fit.curvature, 0.02, 1e-12);
    EXPECT_NEAR(fit.center.x, 0.0, 1e-9);
    EXPECT_NEAR(fit.center.y, 0.0, 1e-9);
    EXPECT_LT(fit.rms_residual, 1e-9);
}

TEST(FitArc, ClockwiseSequenceIsNegative) {
    const auto p = arc_points(0.0, 0.0, 50.0, {90, 60, 30, 0});
    EXPECT_NEAR(fit_arc(p).curvature, -0.02, 1e-12);
}

TEST(FitArc, CollinearIsDegenerate) {
    const std::vector<Point> p{{0, 0}, {10, 5}, {20, 10}, {40, 20}};
    const auto fit = fit_arc(p);
    EXPECT_TRUE(fit.degenerate);
    EXPECT_EQ(fit.curvature, 0.0);
    EXPECT_LT(fit.rms_residual, 1e-9);
}

TEST(FitArc, BadInputRejected) {
    const std::vector<Point> same{{3, 4}, {3, 4}, {3, 4}, {3, 4}};
    EXPECT_THROW(fit_arc(same), InputError);
    const std::vector<Point> two{{0, 0}, {1, 1}};
    EXPECT_THROW(fit_arc(two), InputError);
    const std::vector<Point> nan{{0, 0}, {1, 1}, {2, std::nan("")}, {3, 0}};
    EXPECT_THROW(fit_arc(nan), InputError);
}

TEST(FitArc, RigidMotionInvariance) {
    const auto base = arc_points(3.0, -7.0, 35.0, {-20, 5, 40, 70});
    const double k0 = fit_arc(base).curvature;
    for (double angle : {0.3, 1.9, -2.6}) {
        std::vector<Point> moved;
        for (const auto& q : base) {
            moved.push_back({std::cos(angle) * q.x - std::sin(angle) * q.y + 120.0,
                             std::sin(angle) * q.x + std::cos(angle) * q.y - 45.0});
        }
        EXPECT_LT(relative(fit_arc(moved).curvature, k0), 1e-9);
    }
}

TEST(FitArc, NoisyRadiusWithinLinearisedBound) {
    const std::vector<double> deg{0, 30, 60, 90};
    const double sigma = 0.2;
    const double sigma_r = radius_sigma(deg, sigma);
    std::mt19937_64 rng(20240611);
    std::normal_distribution<double> noise(0.0, sigma);
    const int trials = 1000;
    int inside = 0;
    double sum = 0.0;
    double sum2 = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto p = arc_points(0.0, 0.0, 50.0, deg);
        for (auto& q : p) {
            q.x += noise(rng);
            q.y += noise(rng);
        }
        const double r = fit_arc(p).radius;
        inside += std::abs(r - 50.0) <= 3.0 * sigma_r ? 1 : 0;
        sum += r;
        sum2 += r * r;
    }
    const double mean = sum / trials;
    const double sd = std::sqrt(sum2 / trials - mean * mean);
    EXPECT_GE(inside, 990);
    EXPECT_LT(relative(sd, sigma_r), 0.15);
}

// ---------------------------------------------------------------------------
// synthesize_markers

TEST(Synthesize, StraightLine) {
    const auto p = synthesize_markers(0.0, 0.1);
    ASSERT_EQ(p.size(), 4U);
    const double expect[4] = {0.0, 100.0 / 3.0, 200.0 / 3.0, 100.0};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(p[i].x, expect[i], 1e-12);
        EXPECT_EQ(p[i].y, 0.0);
    }
    EXPECT_TRUE(fit_arc(p).degenerate);
}

TEST(Synthesize, RoundTripIsExact) {
    for (double k : {20.0, -20.0, 3.5, 60.0, -0.8}) {
        const auto fit = fit_arc(synthesize_markers(k, 0.08));
        EXPECT_LT(relative(fit.curvature, k / 1000.0), 1e-9) << k;
    }
}

TEST(Synthesize, RejectsBadArguments) {
    EXPECT_THROW(synthesize_markers(1.0, 0.0), DomainError);
    EXPECT_THROW(synthesize_markers(1.0, 0.1, 1), DomainError);
}

TEST(Synthesize, NoisyRoundTripWithinBound) {
    // Points of a 20 1/m arc of length 80 mm span 1.6 rad of a 50 mm circle.
    const double k = 20.0;
    const double length = 0.08;
    const double span_deg = k * length * 180.0 / std::numbers::pi;
    std::vector<double> deg;
    for (int i = 0; i < 4; ++i) deg.push_back(-90.0 + span_deg * i / 3.0);
    const double sigma = 0.1;
    const double radius = 1000.0 / k;
    const double sigma_kappa = radius_sigma(deg, sigma) / (radius * radius);

    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, sigma);
    int inside = 0;
    for (int t = 0; t < 1000; ++t) {
        auto p = synthesize_markers(k, length);
        for (auto& q : p) {
            q.x += noise(rng);
            q.y += noise(rng);
        }
        inside += std::abs(fit_arc(p).curvature - k / 1000.0) <= 3.0 * sigma_kappa ? 1 : 0;
    }
    EXPECT_GE(inside, 990);
}

// ---------------------------------------------------------------------------
// smooth

TEST(Smooth, ConstantUnchanged) {
    const auto s = sampled(240.0, 1.0, [](double) { return 0.37; });
    const auto out = smooth(s, 20);
    ASSERT_EQ(out.size(), s.size());
    for (double v : out.curvature) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Smooth, ImpulsePeakIsHeightOverWindow) {
    auto s = sampled(240.0, 1.0, [](double) { return 0.0; });
    s.curvature[100] = 5.0;
    const auto out = smooth(s, 20);
    EXPECT_NEAR(out.curvature[100], 5.0 / 20.0, 1e-15);
    double total = 0.0;
    for (double v : out.curvature) total += v;
    EXPECT_NEAR(total, 5.0, 1e-12);
}

TEST(Smooth, OddWindowUniformAndShrinkingEnds) {
    CurvatureSeries s;
    s.sample_rate = 10.0;
    for (int i = 0; i < 8; ++i) {
        s.t.push_back(i / 10.0);
        s.curvature.push_back(i * i);
    }
    const auto out = smooth(s, 5);
    EXPECT_EQ(out.curvature[0], 0.0);
    EXPECT_NEAR(out.curvature[1], (0.0 + 1.0 + 4.0) / 3.0, 1e-15);
    EXPECT_NEAR(out.curvature[3], (1.0 + 4.0 + 9.0 + 16.0 + 25.0) / 5.0, 1e-15);
    EXPECT_EQ(out.curvature[7], 49.0);
}

TEST(Smooth, Linear) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto x = sampled(240.0, 2.0, [](double) { return 0.0; });
    auto y = x;
    auto z = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x.curvature[i] = u(rng);
        y.curvature[i] = u(rng);
        z.curvature[i] = 2.5 * x.curvature[i] - 0.75 * y.curvature[i];
    }
    const auto sx = smooth(x, 20);
    const auto sy = smooth(y, 20);
    const auto sz = smooth(z, 20);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(sz.curvature[i], 2.5 * sx.curvature[i] - 0.75 * sy.curvature[i], 1e-14);
    }
}

TEST(Smooth, WhiteNoiseVarianceReduction) {
    const double sigma = 0.3;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, sigma);
    CurvatureSeries s;
    s.sample_rate = 240.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        s.t.push_back(i / 240.0);
        s.curvature.push_back(noise(rng));
    }
    const auto out = smooth(s, 20);
    double acc = 0.0;
    int count = 0;
    for (int i = 20; i < n - 20; ++i) {
        acc += out.curvature[i] * out.curvature[i];
        ++count;
    }
    const double var = acc / count;
    // Kernel: 19 taps of 1/20 and two of 1/40, sum of squares 19.5 / 400.
    EXPECT_LT(relative(var, sigma * sigma * 19.5 / 400.0), 0.03);
    EXPECT_LT(relative(var, sigma * sigma / 20.0), 0.06);
}

TEST(Smooth, RejectsEmptyAndBadWindow) {
    EXPECT_THROW(smooth(CurvatureSeries{}, 20), InputError);
    EXPECT_THROW(smooth(sampled(10.0, 1.0, [](double) { return 1.0; }), 0), InputError);
}

// ---------------------------------------------------------------------------
// extract_response

double exp_curve(double t) { return 0.02 * (1.0 - std::exp(-t / 0.5)); }

TEST(ExtractResponse, AnalyticExponentialMatchesDenseOracle) {
    const auto s = sampled(240.0, 5.0, exp_curve);
    const auto r = extract_response(s);

    // Brute-force the same rule on a 50x finer grid of the analytic curve.
    const double fine = 240.0 * 50.0;
    const double kmax = exp_curve(5.0);
    double start = -1.0;
    double end = -1.0;
    for (int i = 0; i <= static_cast<int>(5.0 * fine); ++i) {
        const double t = i / fine;
        if (start < 0.0 && std::abs(exp_curve(t)) > 0.02 * kmax) start = t;
        if (start >= 0.0 && t >= start + 0.4) {
            const double now = exp_curve(t);
            if (std::abs(now - exp_curve(t - 0.4)) / std::max(std::abs(now), 1e-6) < 0.05) {
                end = t;
                break;
            }
        }
    }
    ASSERT_GT(end, 0.0);
    EXPECT_NEAR(start, 0.0101, 1e-4);
    EXPECT_NEAR(end, 1.6194, 1e-3);
    EXPECT_LE(std::abs(r.response_time - (end - start)), 1.0 / 240.0);
    EXPECT_NEAR(r.final_curvature, exp_curve(r.end_time), 1e-15);
}

TEST(ExtractResponse, StepSettlesAfterOneWindow) {
    const auto s = sampled(240.0, 2.0, [](double t) { return t >= 0.5 ? 0.03 : 0.0; });
    const auto r = extract_response(s);
    EXPECT_NEAR(r.start_time, 0.5, 1e-12);
    EXPECT_NEAR(r.response_time, 0.4, 1e-12);
    EXPECT_EQ(r.final_curvature, 0.03);
}

TEST(ExtractResponse, RampIsUnsettled) {
    const auto s = sampled(240.0, 2.0, [](double t) { return 0.01 * t; });
    EXPECT_THROW(extract_response(s), UnsettledError);
}

TEST(ExtractResponse, FlatIsNoDeformation) {
    const auto s = sampled(240.0, 2.0, [](double) { return 0.0; });
    EXPECT_THROW(extract_response(s), NoDeformationError);
}

TEST(ExtractResponse, ScaleInvariant) {
    const auto s = sampled(240.0, 5.0, exp_curve);
    const double base = extract_response(s).response_time;
    for (double alpha : {0.1, 3.7, 40.0}) {
        auto scaled = s;
        for (auto& v : scaled.curvature) v *= alpha;
        EXPECT_EQ(extract_response(scaled).response_time, base);
    }
}

TEST(ExtractResponse, NonUniformSamplingRejected) {
    auto s = sampled(240.0, 1.0, exp_curve);
    s.t[10] += 1e-4;
    EXPECT_THROW(extract_response(s), InputError);
}

// ---------------------------------------------------------------------------
// Simulated pipeline

Response pipeline(const ResponseCurve& curve, double arc_length) {
    std::vector<MarkerFrame> frames;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        const auto p = synthesize_markers(curve.curvature[i], arc_length);
        MarkerFrame f;
        f.t = curve.times[i];
        std::copy(p.begin(), p.end(), f.points.begin());
        frames.push_back(f);
    }
    return extract_response(smooth(fit_series(frames, curve.fps), 20));
}

TEST(Pipeline, RecoversModelCurvature) {
    const ActuatorModel model;
    const auto rig = solve_rig(model, water_20c(), 2e5, FlowDirection::Forward);
    const auto curve = response_curve(model, water_20c(), rig.loop_flow, rig.actuator.curvature, 240.0, 6.0);
    const auto r = pipeline(curve, 0.08);
    const auto frame = static_cast<std::size_t>(std::lround(r.end_time * 240.0));
    EXPECT_LT(relative(r.final_curvature * 1000.0, curve.curvature[frame]), 0.01);
}

TEST(Pipeline, FastFillWithoutCreepRecoversFinalCurvature) {
    ActuatorModel model;
    model.creep.amplitude = 0.0;
    const double kappa = 25.0;
    const double q = 3.0 * model.chamber_compliance * (kappa / model.curvature_gain) / 0.1;  // tau 0.1 s
    const auto curve = response_curve(model, water_20c(), q, kappa, 240.0, 3.0);
    const auto r = pipeline(curve, 0.08);
    EXPECT_LT(relative(r.final_curvature * 1000.0, kappa), 0.01);
}

}  // namespace
}  // namespace flowbots::mocap
