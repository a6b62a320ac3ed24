#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace flowbots::mocap {

// Planar marker coordinates, mm.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct MarkerFrame {
    double t = 0.0;  // s
    std::array<Point, 4> points{};
};

struct ArcFit {
    Point center;
    double radius = 0.0;        // mm, infinite when degenerate
    double curvature = 0.0;     // 1/mm, counterclockwise positive
    double rms_residual = 0.0;  // mm
    bool degenerate = false;
    int iterations = 0;
};

struct FitOptions {
    double cond_tol = 1e-10;  // singular-value ratio below which points count as collinear
    int max_iter = 100;
};

// Geometric least-squares circle through >= 3 points: algebraic seed refined
// by damped Gauss-Newton. Throws InputError on non-finite or coincident input.
ArcFit fit_arc(std::span<const Point> points, const FitOptions& options = {});

// Uniformly sampled curvature trace, 1/mm.
struct CurvatureSeries {
    double sample_rate = 240.0;  // Hz
    std::vector<double> t;
    std::vector<double> curvature;

    std::size_t size() const { return t.size(); }
};

// Throws InputError unless t is uniform at 1 / sample_rate (relative 1e-6).
void check_uniform(const CurvatureSeries& series);

CurvatureSeries fit_series(std::span<const MarkerFrame> frames, double sample_rate,
                           const FitOptions& options = {});

// Centred moving average. An even window w uses w + 1 taps with half-weight
// end taps, so its total span is still w frames; near the ends the half
// width shrinks symmetrically.
CurvatureSeries smooth(const CurvatureSeries& series, int window = 20);

struct ResponseOptions {
    double rate_threshold = 0.05;
    double window = 0.4;           // s
    double start_fraction = 0.02;  // onset at this share of max |kappa|
    double kappa_floor = 1e-6;     // 1/mm
};

struct Response {
    double start_time = 0.0;       // s
    double end_time = 0.0;         // s
    double response_time = 0.0;    // s
    double final_curvature = 0.0;  // 1/mm
};

// Throws NoDeformationError / UnsettledError.
Response extract_response(const CurvatureSeries& series, const ResponseOptions& options = {});

// n points equally spaced along an arc of the given curvature (1/m) and
// length (m), starting at the origin tangent to +x; coordinates in mm.
std::vector<Point> synthesize_markers(double curvature, double arc_length, int n_points = 4);

}  // namespace flowbots::mocap
