#include "flowbots/mocap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "flowbots/errors.hpp"

namespace flowbots::mocap {

namespace {

struct Circle {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;
};

double geometric_cost(const std::vector<Point>& p, const Circle& c) {
    double acc = 0.0;
    for (const auto& q : p) {
        const double d = std::hypot(q.x - c.cx, q.y - c.cy) - c.r;
        acc += d * d;
    }
    return acc;
}

}  // namespace

ArcFit fit_arc(std::span<const Point> points, const FitOptions& options) {
    const std::size_t n = points.size();
    if (n < 3) throw InputError("fit_arc needs at least 3 points");
    double mx = 0.0;
    double my = 0.0;
    double magnitude = 0.0;
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InputError("non-finite marker coordinate");
        mx += p.x;
        my += p.y;
        magnitude = std::max({magnitude, std::abs(p.x), std::abs(p.y)});
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    // Centre and normalise for conditioning.
    double spread = 0.0;
    for (const auto& p : points) spread += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
    const double scale = std::sqrt(spread / static_cast<double>(n));
    if (!(scale > 1e-12 * (1.0 + magnitude))) throw InputError("marker points are coincident");
    std::vector<Point> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = {(points[i].x - mx) / scale, (points[i].y - my) / scale};

    ArcFit fit;
    const auto degenerate = [&] {
        // Collinear: report the straight-line residual.
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        for (const auto& q : u) {
            cov(0, 0) += q.x * q.x;
            cov(0, 1) += q.x * q.y;
            cov(1, 1) += q.y * q.y;
        }
        cov(1, 0) = cov(0, 1);
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov).eigenvalues()(0);
        fit.degenerate = true;
        fit.curvature = 0.0;
        fit.radius = std::numeric_limits<double>::infinity();
        fit.center = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        fit.rms_residual = scale * std::sqrt(std::max(lmin, 0.0) / static_cast<double>(n));
        return fit;
    };

    // Algebraic seed: x^2 + y^2 + D x + E y + F = 0.
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, 0) = u[i].x;
        a(i, 1) = u[i].y;
        a(i, 2) = 1.0;
        b(i) = -(u[i].x * u[i].x + u[i].y * u[i].y);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv(2) > options.cond_tol * sv(0))) return degenerate();
    const Eigen::Vector3d def = svd.solve(b);
    Circle c{-0.5 * def(0), -0.5 * def(1), 0.0};
    const double r2 = c.cx * c.cx + c.cy * c.cy - def(2);
    if (!(r2 > 0.0)) return degenerate();
    c.r = std::sqrt(r2);

    // Levenberg-Marquardt on the geometric residuals.
    double cost = geometric_cost(u, c);
    double lambda = 1e-3;
    int iter = 0;
    for (; iter < options.max_iter && cost > 1e-30; ++iter) {
        Eigen::MatrixXd j(n, 3);
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = u[i].x - c.cx;
            const double dy = u[i].y - c.cy;
            const double d = std::hypot(dx, dy);
            r(i) = d - c.r;
            j(i, 0) = d > 0.0 ? -dx / d : 0.0;
            j(i, 1) = d > 0.0 ? -dy / d : 0.0;
            j(i, 2) = -1.0;
        }
        const Eigen::Matrix3d jtj = j.transpose() * j;
        const Eigen::Vector3d g = j.transpose() * r;
        bool improved = false;
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        for (int tries = 0; tries < 30 && !improved; ++tries) {
            Eigen::Matrix3d m = jtj;
            for (int k = 0; k < 3; ++k) m(k, k) += lambda * std::max(jtj(k, k), 1e-12);
            step = m.ldlt().solve(-g);
            const Circle trial{c.cx + step(0), c.cy + step(1), c.r + step(2)};
            const double tc = geometric_cost(u, trial);
            if (std::isfinite(tc) && tc < cost) {
                c = trial;
                cost = tc;
                lambda = std::max(lambda * 0.1, 1e-12);
                improved = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved || step.norm() <= 1e-15 * (1.0 + std::abs(c.r))) break;
    }

    fit.iterations = iter;
    fit.center = {mx + scale * c.cx, my + scale * c.cy};
    fit.radius = scale * std::abs(c.r);
    fit.rms_residual = scale * std::sqrt(cost / static_cast<double>(n));
    // Orientation from the signed area swept about the centre; valid past a half turn.
    double cross = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        cross += (u[i].x - c.cx) * (u[i + 1].y - c.cy) - (u[i].y - c.cy) * (u[i + 1].x - c.cx);
    }
    fit.curvature = (cross >= 0.0 ? 1.0 : -1.0) / fit.radius;
    return fit;
}

void check_uniform(const CurvatureSeries& series) {
    if (series.t.size() != series.curvature.size()) throw InputError("time and curvature lengths differ");
    if (!(series.sample_rate > 0.0) || !std::isfinite(series.sample_rate)) {
        throw InputError("sample rate must be positive");
    }
    const double period = 1.0 / series.sample_rate;
    for (std::size_t i = 1; i < series.t.size(); ++i) {
        if (std::abs(series.t[i] - series.t[i - 1] - period) > 1e-6 * period) {
            throw InputError(fmt::format("non-uniform sampling at index {} (t = {})", i, series.t[i]));
        }
    }
}

CurvatureSeries fit_series(std::span<const MarkerFrame> frames, double sample_rate,
                           const FitOptions& options) {
    CurvatureSeries out;
    out.sample_rate = sample_rate;
    out.t.reserve(frames.size());
    out.curvature.reserve(frames.size());
    for (const auto& f : frames) {
        out.t.push_back(f.t);
        out.curvature.push_back(fit_arc(f.points, options).curvature);
    }
    check_uniform(out);
    return out;
}

CurvatureSeries smooth(const CurvatureSeries& series, int window) {
    if (series.curvature.empty()) throw InputError("cannot smooth an empty series");
    if (window < 1) throw InputError("smoothing window must be >= 1");
    const auto n = static_cast<long>(series.curvature.size());
    const long h = window / 2;
    const bool even = window % 2 == 0;
    const auto& k = series.curvature;

    CurvatureSeries out = series;
    for (long i = 0; i < n; ++i) {
        const long hh = std::min({h, i, n - 1 - i});
        double acc = 0.0;
        if (hh == h && even && h > 0) {
            for (long d = -h + 1; d <= h - 1; ++d) acc += k[i + d];
            acc += 0.5 * (k[i - h] + k[i + h]);
            out.curvature[i] = acc / static_cast<double>(window);
        } else {
            for (long d = -hh; d <= hh; ++d) acc += k[i + d];
            out.curvature[i] = acc / static_cast<double>(2 * hh + 1);
        }
    }
    return out;
}

Response extract_response(const CurvatureSeries& series, const ResponseOptions& options) {
    check_uniform(series);
    const std::size_t n = series.size();
    if (n < 2) throw InputError("series too short");
    const double duration = series.t.back() - series.t.front();
    if (!(duration > options.window)) throw InputError("series shorter than the settling window");

    double max_abs = 0.0;
    for (double v : series.curvature) max_abs = std::max(max_abs, std::abs(v));
    if (!(max_abs > options.kappa_floor)) throw NoDeformationError("curvature never leaves zero");
    const double k_start = options.start_fraction * max_abs;
    std::size_t start = 0;
    while (start < n && !(std::abs(series.curvature[start]) > k_start)) ++start;

    const auto lag = static_cast<std::size_t>(std::max(1L, std::lround(options.window * series.sample_rate)));
    for (std::size_t j = start + lag; j < n; ++j) {
        const double now = series.curvature[j];
        const double change = std::abs(now - series.curvature[j - lag]);
        if (change / std::max(std::abs(now), options.kappa_floor) < options.rate_threshold) {
            Response r;
            r.start_time = series.t[start];
            r.end_time = series.t[j];
            r.response_time = r.end_time - r.start_time;
            r.final_curvature = now;
            return r;
        }
    }
    throw UnsettledError("curvature did not settle within the series");
}

std::vector<Point> synthesize_markers(double curvature, double arc_length, int n_points) {
    if (!(arc_length > 0.0) || !std::isfinite(arc_length)) throw DomainError("arc length must be positive");
    if (n_points < 2) throw DomainError("need at least 2 marker points");
    if (!std::isfinite(curvature)) throw DomainError("curvature must be finite");
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double s = arc_length * i / (n_points - 1);
        double x = s;
        double y = 0.0;
        if (curvature != 0.0) {
            const double half = 0.5 * curvature * s;
            x = std::sin(curvature * s) / curvature;
            y = 2.0 * std::sin(half) * std::sin(half) / curvature;
        }
        out.push_back({1000.0 * x, 1000.0 * y});
    }
    return out;
}

}  // namespace flowbots::mocap
