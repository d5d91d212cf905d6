#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chm/fluxframe.hpp"

// Moving-window rectangular-hyperbola fits producing the nonlinear light
// transform f(SW) used as the treatment in flux partitioning:
//   NEE ~= -alpha*beta*SW / (alpha*SW + beta) + gamma
// fitted per window, then f(SW) = alpha*beta*SW / (alpha*SW + beta).

namespace chm::light {

enum class FitStatus { Converged, MaxIterations, TooFewPoints };

struct HyperbolaParams {
    double alpha = 0.0; // initial slope, > 0 (log-parameterized)
    double beta = 0.0;  // asymptote, > 0
    double gamma = 0.0; // offset, unconstrained
    std::int64_t window_start = 0, window_end = 0; // timestamps
    bool converged = false;
    FitStatus status = FitStatus::TooFewPoints;
    double sse = 0.0;
    std::size_t n_daytime = 0;
};

// Levenberg-Marquardt over (log alpha, log beta, gamma); needs >= 10 daytime
// points (SW > 0), otherwise returns status TooFewPoints without fitting.
// Converged when the relative SSE change drops below 1e-10, capped at 200
// iterations; the best iterate is returned either way.
HyperbolaParams fit_hyperbola(const std::vector<double>& sw, const std::vector<double>& nee,
                              const HyperbolaParams& init);

// Scale-aware deterministic starting point used by transform_sw.
HyperbolaParams default_init(const std::vector<double>& sw, const std::vector<double>& nee);

struct TransformResult {
    std::vector<double> f_sw;            // f(SW) per row; 0 on nighttime rows
    std::vector<HyperbolaParams> windows; // per-window diagnostics
};

// Slides a window of `window_days` in steps of `center_days`, fits the
// hyperbola per window, and emits f(SW) for the center block; boundary rows
// and skipped windows inherit the nearest successful window's parameters.
TransformResult transform_sw(const FluxFrame& frame, const std::string& sw_col,
                             const std::string& nee_col, double window_days = 15.0,
                             double center_days = 5.0);

// Optional per-window diagnostics dump (alpha,beta,gamma,sse,converged).
void write_window_csv(const std::vector<HyperbolaParams>& windows, const std::string& path);

} // namespace chm::light
