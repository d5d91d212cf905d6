#pragma once

#include <vector>

namespace chm {

// Centered moving mean over ~window_days*samples_per_day samples. The window
// shrinks symmetrically at the series ends (never fewer than half the nominal
// window on one side); output length equals input length.
std::vector<double> moving_average_smooth(const std::vector<double>& series,
                                          double window_days, double samples_per_day);

// d[i] = (s[i+1] - s[i-1]) / 2 in the interior, one-sided at the endpoints.
// Units are per sample.
std::vector<double> central_difference(const std::vector<double>& series);

} // namespace chm
